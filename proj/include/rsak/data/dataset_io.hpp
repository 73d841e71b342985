#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "rsak/data/generator.hpp"
#include "rsak/data/sample.hpp"

namespace rsak::data {

/// Malformed dataset or vocabulary input. The message names the source, the
/// 1-based line and the byte offset where the offending line starts.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON object per line:
///   {"image":[[r,g,b],...],"tokens":[...],"qtype":"count","answer":3}
/// Reals are written with round-trip precision, so save then load is exact.
void write_dataset(std::ostream& os, const Dataset& samples);
Dataset read_dataset(std::istream& is, const std::string& source = "<stream>");

/// `path` holds the samples; `vocab_path(path)` holds the vocabulary sidecar.
void save_dataset(const std::filesystem::path& path, const Dataset& samples,
                  const Vocab& vocab = task_vocab());
Dataset load_dataset(const std::filesystem::path& path);

std::filesystem::path vocab_path(const std::filesystem::path& dataset);
void save_vocab(const std::filesystem::path& path, const Vocab& vocab);
Vocab load_vocab(const std::filesystem::path& path);

}  // namespace rsak::data
