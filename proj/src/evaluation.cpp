#include "ovo/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "ovo/parallel.hpp"

namespace ovo {

ConfusionMatrix::ConfusionMatrix(int class_count) : class_count_(class_count) {
  if (class_count < 1) {
    throw std::invalid_argument("confusion matrix needs at least one class");
  }
  counts_.assign(static_cast<std::size_t>(class_count + 1) *
                     static_cast<std::size_t>(class_count + 1),
                 0);
}

std::int64_t ConfusionMatrix::at(int gt, int pred) const {
  return counts_[static_cast<std::size_t>(gt) * (class_count_ + 1) +
                 static_cast<std::size_t>(pred)];
}

std::int64_t& ConfusionMatrix::at(int gt, int pred) {
  return counts_[static_cast<std::size_t>(gt) * (class_count_ + 1) +
                 static_cast<std::size_t>(pred)];
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (std::int64_t c : counts_) {
    n += c;
  }
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.class_count_ != class_count_) {
    throw std::invalid_argument("confusion matrices have different class counts");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts_[i] += other.counts_[i];
  }
  return *this;
}

ConfusionMatrix accumulate(const LabelVolume& pred, const LabelVolume& gt,
                           const std::set<int>& ignore, int class_count, int workers) {
  if (pred.grid.dims != gt.grid.dims) {
    throw std::invalid_argument("prediction and ground-truth volumes have different dims");
  }
  const std::int64_t n = gt.grid.voxel_count();
  constexpr std::int64_t kChunk = 65536;
  const std::int64_t chunks = chunk_count(n, kChunk);
  std::vector<ConfusionMatrix> partials(static_cast<std::size_t>(chunks),
                                        ConfusionMatrix(class_count));
  for_each_chunk(n, kChunk, workers,
                 [&](std::int64_t c, std::int64_t begin, std::int64_t end) {
                   ConfusionMatrix& cm = partials[static_cast<std::size_t>(c)];
                   for (std::int64_t v = begin; v < end; ++v) {
                     const int g = gt.at(v);
                     if (g == LabelVolume::kInvalid || ignore.count(g) > 0) {
                       continue;
                     }
                     const int p = pred.at(v);
                     if (g > class_count || p > class_count) {
                       throw std::invalid_argument("label id outside confusion matrix range");
                     }
                     ++cm.at(g, p);
                   }
                 });
  ConfusionMatrix total(class_count);
  for (const auto& cm : partials) {
    total += cm;
  }
  return total;
}

std::vector<double> iou_per_class(const ConfusionMatrix& cm) {
  const int k = cm.class_count();
  std::vector<double> iou(static_cast<std::size_t>(k + 1),
                          std::numeric_limits<double>::quiet_NaN());
  for (int c = 0; c <= k; ++c) {
    std::int64_t tp = cm.at(c, c);
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    for (int o = 0; o <= k; ++o) {
      if (o != c) {
        fp += cm.at(o, c);
        fn += cm.at(c, o);
      }
    }
    const std::int64_t denom = tp + fp + fn;
    if (denom > 0) {
      iou[static_cast<std::size_t>(c)] =
          static_cast<double>(tp) / static_cast<double>(denom);
    }
  }
  return iou;
}

EvalReport summarize(const std::vector<double>& ious, const CategorySchema& schema,
                     std::int64_t evaluated_voxels) {
  if (static_cast<int>(ious.size()) != schema.category_count() + 1) {
    throw std::invalid_argument("iou vector does not match schema (expect K+1 entries)");
  }
  EvalReport report;
  report.evaluated_voxels = evaluated_voxels;
  double base_sum = 0.0;
  double novel_sum = 0.0;
  for (int label = 1; label <= schema.category_count(); ++label) {
    const auto& cat = schema.category_for_label(label);
    const double value = ious[static_cast<std::size_t>(label)];
    report.class_names.push_back(cat.name);
    report.iou.push_back(value);
    report.subset.push_back(cat.background ? "background" : (cat.base ? "base" : "novel"));
    if (std::isnan(value)) {
      continue;
    }
    if (schema.is_base(label)) {
      base_sum += value;
      ++report.base_defined;
    } else if (schema.is_novel(label)) {
      novel_sum += value;
      ++report.novel_defined;
    }
  }
  report.base_mean = report.base_defined > 0 ? base_sum / report.base_defined
                                             : std::numeric_limits<double>::quiet_NaN();
  report.novel_mean = report.novel_defined > 0 ? novel_sum / report.novel_defined
                                               : std::numeric_limits<double>::quiet_NaN();
  return report;
}

namespace {

std::string format_iou(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t i = 0; i < report.class_names.size(); ++i) {
    nlohmann::json row;
    row["name"] = report.class_names[i];
    row["subset"] = report.subset[i];
    row["defined"] = !std::isnan(report.iou[i]);
    if (std::isnan(report.iou[i])) {
      row["iou"] = nullptr;
    } else {
      row["iou"] = report.iou[i];
    }
    classes.push_back(row);
  }
  j["classes"] = classes;
  j["base_mean"] = std::isnan(report.base_mean) ? nlohmann::json(nullptr)
                                                : nlohmann::json(report.base_mean);
  j["novel_mean"] = std::isnan(report.novel_mean) ? nlohmann::json(nullptr)
                                                  : nlohmann::json(report.novel_mean);
  j["base_defined"] = report.base_defined;
  j["novel_defined"] = report.novel_defined;
  j["evaluated_voxels"] = report.evaluated_voxels;
  return j;
}

}  // namespace

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  f << "name,iou,subset\n";
  for (std::size_t i = 0; i < report.class_names.size(); ++i) {
    f << report.class_names[i] << "," << format_iou(report.iou[i]) << "," << report.subset[i]
      << "\n";
  }
  f << "base_mean," << format_iou(report.base_mean) << ",base\n";
  f << "novel_mean," << format_iou(report.novel_mean) << ",novel\n";
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  f << report_to_json(report).dump(2) << "\n";
}

std::string report_json_string(const EvalReport& report) {
  return report_to_json(report).dump(2);
}

}  // namespace ovo
