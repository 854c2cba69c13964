#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ovo/vocab.hpp"
#include "ovo/volume.hpp"

namespace ovo {

/// (K+1) x (K+1) integer counts; row = ground truth, column = prediction,
/// index 0 = empty. Invalid (255) ground truth is always skipped.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int class_count);

  int class_count() const { return class_count_; }
  std::int64_t at(int gt, int pred) const;
  std::int64_t& at(int gt, int pred);
  std::int64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

 private:
  int class_count_ = 0;
  std::vector<std::int64_t> counts_;
};

/// Counts prediction/ground-truth pairs over voxels whose GT label is not
/// ignored. Throws on mismatched dims or label ids outside [0, K].
/// Partition-and-merge over fixed chunks: private per-chunk matrices are
/// combined by integer addition, so the result is worker-count independent.
ConfusionMatrix accumulate(const LabelVolume& pred, const LabelVolume& gt,
                           const std::set<int>& ignore, int class_count, int workers = 1);

/// IoU_c = TP / (TP + FP + FN). Classes with an empty denominator come back
/// as NaN and are excluded from any mean.
std::vector<double> iou_per_class(const ConfusionMatrix& cm);

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<double> iou;        // NaN = undefined
  std::vector<std::string> subset;  // "base" | "novel" | "background"
  double base_mean = 0.0;
  double novel_mean = 0.0;
  int base_defined = 0;
  int novel_defined = 0;
  std::int64_t evaluated_voxels = 0;
};

/// Means are taken over the defined classes of each subset, mirroring the
/// base/novel table layout.
EvalReport summarize(const std::vector<double>& ious, const CategorySchema& schema,
                     std::int64_t evaluated_voxels);

void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
void write_report_json(const EvalReport& report, const std::filesystem::path& path);
std::string report_json_string(const EvalReport& report);

}  // namespace ovo
