#include "stylebench/transfer_batch.hpp"

#include <fstream>
#include <sstream>

#include "stylebench/errors.hpp"

namespace stylebench {

StyleCode::StyleCode(int label) : label_(label) {
  if (label != 0 && label != 1) {
    throw ConfigError("style code must be 0 or 1, got " +
                      std::to_string(label));
  }
}

std::vector<Sentence> TransferBatch::inputs() const {
  std::vector<Sentence> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.input);
  return out;
}

std::vector<Sentence> TransferBatch::outputs() const {
  std::vector<Sentence> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.output);
  return out;
}

TransferRecord make_record(Sentence input, int source_label, Sentence output) {
  const StyleCode source(source_label);
  return {std::move(input), source, source.inverse(), std::move(output)};
}

std::string format_batch(const TransferBatch& batch) {
  std::string out;
  for (const auto& r : batch.records) {
    out += r.input.text() + '\t' + r.output.text() + '\t' +
           std::to_string(r.source.label()) + '\n';
  }
  return out;
}

void save_batch(const TransferBatch& batch, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << format_batch(batch);
}

TransferBatch parse_batch(std::string_view contents,
                          const std::vector<int>* labels) {
  TransferBatch batch;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::vector<std::string_view> cols;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string_view::npos
                                          ? std::string_view::npos
                                          : tab - pos));
      if (tab == std::string_view::npos) break;
      pos = tab + 1;
    }
    int label = 0;
    if (cols.size() == 3) {
      if (cols[2] != "0" && cols[2] != "1") {
        throw ParseError(line_no, "source label must be 0 or 1");
      }
      label = cols[2] == "1" ? 1 : 0;
    } else if (cols.size() == 2 && labels) {
      if (batch.records.size() >= labels->size()) {
        throw ParseError(line_no, "more batch lines than labels");
      }
      label = (*labels)[batch.records.size()];
    } else {
      throw ParseError(line_no, "expected <input>\\t<output>\\t<source_label>");
    }
    try {
      batch.records.push_back(
          make_record(tokenize(cols[0]), label, tokenize(cols[1])));
    } catch (const EmptySentence&) {
      throw ParseError(line_no, "empty input or output");
    }
  }
  if (labels && batch.records.size() != labels->size()) {
    throw AlignmentError(batch.records.size(), labels->size());
  }
  if (batch.empty()) throw EmptyBatch();
  return batch;
}

TransferBatch load_batch(const std::filesystem::path& path,
                         const std::vector<int>* labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open batch " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_batch(buf.str(), labels);
}

}  // namespace stylebench
