#include "ovo/tensor.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "tensor payloads are little-endian; big-endian hosts are unsupported");

namespace ovo {

namespace {

std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("tensor shape extents must be positive");
    }
    n *= d;
  }
  return n;
}

}  // namespace

std::string dtype_name(Dtype dtype) { return dtype == Dtype::f32 ? "f32" : "f64"; }

Dtype dtype_from_name(const std::string& name) {
  if (name == "f32") {
    return Dtype::f32;
  }
  if (name == "f64") {
    return Dtype::f64;
  }
  throw std::runtime_error("unknown tensor dtype: " + name);
}

std::size_t dtype_width(Dtype dtype) { return dtype == Dtype::f32 ? 4 : 8; }

DenseTensor::DenseTensor(std::vector<std::int64_t> shape, Dtype dtype)
    : shape_(std::move(shape)), dtype_(dtype) {
  values_ = Eigen::VectorXd::Zero(shape_product(shape_));
}

DenseTensor DenseTensor::from_values(std::vector<std::int64_t> shape, Dtype dtype,
                                     Eigen::VectorXd values) {
  DenseTensor t;
  t.shape_ = std::move(shape);
  t.dtype_ = dtype;
  if (shape_product(t.shape_) != values.size()) {
    throw std::invalid_argument("tensor data length does not match shape");
  }
  if (!values.allFinite()) {
    throw std::invalid_argument("tensor contains non-finite values");
  }
  t.values_ = std::move(values);
  return t;
}

Eigen::Map<const RowMajorMatrixXd> DenseTensor::matrix() const {
  if (shape_.empty()) {
    throw std::logic_error("cannot view a rank-0 tensor as a matrix");
  }
  const std::int64_t cols = shape_.back();
  const std::int64_t rows = values_.size() / cols;
  return {values_.data(), rows, cols};
}

void DenseTensor::quantize_to_dtype() {
  if (dtype_ != Dtype::f32) {
    return;
  }
  for (std::int64_t i = 0; i < values_.size(); ++i) {
    values_[i] = static_cast<double>(static_cast<float>(values_[i]));
  }
}

void save_tensor(const DenseTensor& tensor, const std::filesystem::path& manifest_path) {
  const std::filesystem::path bin_path =
      std::filesystem::path(manifest_path).replace_extension(".bin");

  nlohmann::json manifest;
  manifest["dtype"] = dtype_name(tensor.dtype());
  manifest["shape"] = tensor.shape();
  manifest["layout"] = "row-major";
  manifest["endianness"] = "little";
  manifest["data"] = bin_path.filename().string();

  std::ofstream mf(manifest_path);
  if (!mf) {
    throw std::runtime_error("cannot open for writing: " + manifest_path.string());
  }
  mf << manifest.dump(2) << "\n";
  mf.close();

  std::ofstream bf(bin_path, std::ios::binary);
  if (!bf) {
    throw std::runtime_error("cannot open for writing: " + bin_path.string());
  }
  const Eigen::VectorXd& v = tensor.values();
  if (tensor.dtype() == Dtype::f32) {
    std::vector<float> narrow(static_cast<std::size_t>(v.size()));
    for (std::int64_t i = 0; i < v.size(); ++i) {
      narrow[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
    }
    bf.write(reinterpret_cast<const char*>(narrow.data()),
             static_cast<std::streamsize>(narrow.size() * sizeof(float)));
  } else {
    bf.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(static_cast<std::size_t>(v.size()) * sizeof(double)));
  }
  if (!bf) {
    throw std::runtime_error("failed writing payload: " + bin_path.string());
  }
}

DenseTensor load_tensor(const std::filesystem::path& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) {
    throw std::runtime_error("cannot open tensor manifest: " + manifest_path.string());
  }
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed tensor manifest " + manifest_path.string() + ": " +
                             e.what());
  }

  const Dtype dtype = dtype_from_name(manifest.at("dtype").get<std::string>());
  const auto shape = manifest.at("shape").get<std::vector<std::int64_t>>();
  if (manifest.at("layout").get<std::string>() != "row-major") {
    throw std::runtime_error("unsupported tensor layout in " + manifest_path.string());
  }
  if (manifest.at("endianness").get<std::string>() != "little") {
    throw std::runtime_error("unsupported tensor endianness in " + manifest_path.string());
  }
  const std::filesystem::path bin_path =
      manifest_path.parent_path() / manifest.at("data").get<std::string>();

  std::ifstream bf(bin_path, std::ios::binary);
  if (!bf) {
    throw std::runtime_error("cannot open tensor payload: " + bin_path.string());
  }
  bf.seekg(0, std::ios::end);
  const std::int64_t byte_size = static_cast<std::int64_t>(bf.tellg());
  bf.seekg(0, std::ios::beg);

  const std::int64_t count = shape_product(shape);
  const std::int64_t expected = count * static_cast<std::int64_t>(dtype_width(dtype));
  if (byte_size != expected) {
    throw std::runtime_error("payload size mismatch: " + bin_path.string() + " has " +
                             std::to_string(byte_size) + " bytes, expected " +
                             std::to_string(expected));
  }

  Eigen::VectorXd values(count);
  if (dtype == Dtype::f32) {
    std::vector<float> narrow(static_cast<std::size_t>(count));
    bf.read(reinterpret_cast<char*>(narrow.data()), expected);
    for (std::int64_t i = 0; i < count; ++i) {
      values[i] = static_cast<double>(narrow[static_cast<std::size_t>(i)]);
    }
  } else {
    bf.read(reinterpret_cast<char*>(values.data()), expected);
  }
  if (!bf) {
    throw std::runtime_error("failed reading payload: " + bin_path.string());
  }
  return DenseTensor::from_values(shape, dtype, std::move(values));
}

}  // namespace ovo
