#include "rsak/data/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>

namespace rsak::data {

using nlohmann::json;

namespace {

json to_json(const VQASample& s) {
  json image = json::array();
  for (std::size_t r = 0; r < s.image.rows(); ++r) {
    auto row = s.image.row(r);
    image.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return json{{"image", std::move(image)},
              {"tokens", s.tokens},
              {"qtype", std::string(to_string(s.qtype))},
              {"answer", s.answer}};
}

const json& field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return *it;
}

VQASample from_json(const json& obj) {
  if (!obj.is_object()) throw std::invalid_argument("record is not an object");
  VQASample s;
  const json& image = field(obj, "image");
  if (!image.is_array() || image.empty())
    throw std::invalid_argument("'image' must be a nonempty array of rows");
  const std::size_t cols = image.front().is_array() ? image.front().size() : 0;
  if (cols == 0) throw std::invalid_argument("'image' rows must be nonempty arrays");
  s.image = Matrix(image.size(), cols);
  for (std::size_t r = 0; r < image.size(); ++r) {
    const json& row = image[r];
    if (!row.is_array() || row.size() != cols)
      throw std::invalid_argument("'image' row " + std::to_string(r) + " has the wrong length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number())
        throw std::invalid_argument("'image' entry is not a number");
      s.image(r, c) = row[c].get<double>();
    }
  }
  const json& tokens = field(obj, "tokens");
  if (!tokens.is_array() || tokens.empty())
    throw std::invalid_argument("'tokens' must be a nonempty integer array");
  for (const json& t : tokens) {
    if (!t.is_number_integer()) throw std::invalid_argument("'tokens' entry is not an integer");
    s.tokens.push_back(t.get<int>());
  }
  const json& qtype = field(obj, "qtype");
  if (!qtype.is_string()) throw std::invalid_argument("'qtype' must be a string");
  s.qtype = parse_question_type(qtype.get<std::string>());
  const json& answer = field(obj, "answer");
  if (!answer.is_number_integer() || answer.get<long long>() < 0)
    throw std::invalid_argument("'answer' must be a non-negative integer");
  s.answer = answer.get<int>();
  return s;
}

}  // namespace

void write_dataset(std::ostream& os, const Dataset& samples) {
  for (const VQASample& s : samples) os << to_json(s).dump() << '\n';
}

Dataset read_dataset(std::istream& is, const std::string& source) {
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (true) {
    const std::size_t start = offset;
    if (!std::getline(is, line)) break;
    ++line_no;
    const bool had_newline = !is.eof();
    offset += line.size() + (had_newline ? 1 : 0);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw DatasetError(source + ": line " + std::to_string(line_no) + " (byte offset " +
                         std::to_string(start) + "): " + e.what());
    }
  }
  return out;
}

std::filesystem::path vocab_path(const std::filesystem::path& dataset) {
  return std::filesystem::path(dataset.string() + ".vocab.json");
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::ofstream os(path);
  if (!os) throw DatasetError("cannot write " + path.string());
  os << json{{"words", vocab.words}, {"answers", vocab.answers}}.dump(2) << '\n';
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DatasetError("cannot open vocabulary " + path.string());
  try {
    const json j = json::parse(is);
    Vocab v;
    v.words = field(j, "words").get<std::vector<std::string>>();
    v.answers = field(j, "answers").get<std::vector<std::string>>();
    return v;
  } catch (const std::exception& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& samples, const Vocab& vocab) {
  std::ofstream os(path);
  if (!os) throw DatasetError("cannot write " + path.string());
  write_dataset(os, samples);
  if (!os) throw DatasetError("write failed for " + path.string());
  save_vocab(vocab_path(path), vocab);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DatasetError("cannot open dataset " + path.string());
  return read_dataset(is, path.string());
}

}  // namespace rsak::data
