#ifndef STYLEBENCH_TRANSFER_BATCH_HPP_
#define STYLEBENCH_TRANSFER_BATCH_HPP_

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stylebench/corpus.hpp"

namespace stylebench {

// Binary style code; 0 = negative, 1 = positive.
class StyleCode {
 public:
  StyleCode() = default;
  explicit StyleCode(int label);

  int label() const { return label_; }
  StyleCode inverse() const { return StyleCode(1 - label_); }
  std::array<double, 2> one_hot() const {
    return label_ == 1 ? std::array<double, 2>{0.0, 1.0}
                       : std::array<double, 2>{1.0, 0.0};
  }

  friend bool operator==(const StyleCode&, const StyleCode&) = default;

 private:
  int label_ = 0;
};

struct TransferRecord {
  Sentence input;
  StyleCode source;
  StyleCode target;  // always source.inverse()
  Sentence output;

  friend bool operator==(const TransferRecord&,
                         const TransferRecord&) = default;
};

struct TransferBatch {
  std::vector<TransferRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::vector<Sentence> inputs() const;
  std::vector<Sentence> outputs() const;

  friend bool operator==(const TransferBatch&, const TransferBatch&) = default;
};

TransferRecord make_record(Sentence input, int source_label, Sentence output);

// Batch file: `<input>\t<output>\t<source_label>` per line. A two-column
// variant `<input>\t<output>` is accepted when labels come from elsewhere.
std::string format_batch(const TransferBatch& batch);
void save_batch(const TransferBatch& batch, const std::filesystem::path& path);
TransferBatch parse_batch(std::string_view contents,
                          const std::vector<int>* labels = nullptr);
TransferBatch load_batch(const std::filesystem::path& path,
                         const std::vector<int>* labels = nullptr);

}  // namespace stylebench

#endif  // STYLEBENCH_TRANSFER_BATCH_HPP_
