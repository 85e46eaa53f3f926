#include "ldrld/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "ldrld/errors.hpp"
#include "seeding.hpp"

namespace ldrld {

void MlpSpec::validate() const {
  if (input_dim == 0) throw InvalidArgument("MLP input_dim must be >= 1");
  if (num_classes < 2) throw InvalidArgument("MLP needs at least 2 classes");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw InvalidArgument("MLP hidden widths must be >= 1");
  }
}

namespace {

std::vector<std::size_t> layer_widths(const MlpSpec& spec) {
  std::vector<std::size_t> widths{spec.input_dim};
  widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  widths.push_back(spec.num_classes);
  return widths;
}

std::vector<Tensor> deep_copy(const std::vector<Tensor>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.detach(p.requires_grad()));
  return out;
}

}  // namespace

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  auto rng = detail::seeded_rng({spec_.seed, 0x1417});
  const auto widths = layer_widths(spec_);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<double> w(in * out), b(out);
    for (double& v : w) v = u(rng);
    for (double& v : b) v = u(rng);
    params_.push_back(Tensor::matrix(in, out, std::move(w), true));
    params_.push_back(Tensor::from({out}, std::move(b), true));
  }
}

Mlp::Mlp(MlpSpec spec, std::vector<Tensor> params) : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  const auto widths = layer_widths(spec_);
  if (params_.size() != 2 * (widths.size() - 1)) throw ShapeError("parameter count does not match spec");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (params_[2 * l].shape() != Shape{widths[l], widths[l + 1]} ||
        params_[2 * l + 1].shape() != Shape{widths[l + 1]}) {
      throw ShapeError("parameter shapes do not match spec at layer " + std::to_string(l));
    }
  }
}

Mlp::Mlp(const Mlp& other) : spec_(other.spec_), params_(deep_copy(other.params_)) {}

Mlp& Mlp::operator=(const Mlp& other) {
  if (this != &other) {
    spec_ = other.spec_;
    params_ = deep_copy(other.params_);
  }
  return *this;
}

Tensor Mlp::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != spec_.input_dim) {
    throw ShapeError("MLP expects B x " + std::to_string(spec_.input_dim) + " input");
  }
  Tensor h = x;
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = add_bias(matmul(h, params_[2 * l]), params_[2 * l + 1]);
    if (l + 1 < layers) h = relu(h);
  }
  return h;
}

std::vector<double> Mlp::logits(const Dataset& data) const {
  if (data.dim != spec_.input_dim) throw ShapeError("dataset dimension does not match model input");
  NoGradGuard no_grad;
  std::vector<double> out;
  out.reserve(data.num_samples * spec_.num_classes);
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.num_samples; start += kChunk) {
    idx.resize(std::min(kChunk, data.num_samples - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor z = forward(data.batch(idx));
    out.insert(out.end(), z.data().begin(), z.data().end());
  }
  return out;
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> out;
  for (const auto& p : params_) out.insert(out.end(), p.data().begin(), p.data().end());
  return out;
}

void Mlp::set_trainable(bool trainable) {
  for (auto& p : params_) p = p.detach(trainable);
}

std::vector<std::size_t> argmax_rows(std::span<const double> logits, std::size_t classes) {
  std::vector<std::size_t> out;
  out.reserve(logits.size() / classes);
  for (std::size_t r = 0; r + classes <= logits.size(); r += classes) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits[r + c] > logits[r + best]) best = c;
    }
    out.push_back(best);
  }
  return out;
}

double accuracy(const Mlp& model, const Dataset& data) {
  if (data.num_classes != model.spec().num_classes) {
    throw ShapeError("dataset class count does not match model output");
  }
  const auto pred = argmax_rows(model.logits(data), model.spec().num_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.num_samples);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

class Writer {
 public:
  void raw(const char* p, std::size_t n) { bytes_.append(p, n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint is truncated");
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])} << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;
constexpr std::uint64_t kMaxDim = 1u << 24;

}  // namespace

std::string serialize_checkpoint(const Mlp& model) {
  const auto& spec = model.spec();
  Writer w;
  w.raw(kCheckpointMagic, kMagicLen);
  w.u32(kCheckpointVersion);
  w.u64(spec.input_dim);
  w.u64(spec.hidden_dims.size());
  for (std::size_t h : spec.hidden_dims) w.u64(h);
  w.u64(spec.num_classes);
  w.u64(spec.seed);
  w.u64(model.parameters().size());
  for (const auto& p : model.parameters()) {
    const bool matrix = p.rank() == 2;
    w.u64(matrix ? p.rows() : 1);
    w.u64(matrix ? p.cols() : p.size());
    for (double v : p.data()) w.f64(v);
  }
  return w.take();
}

Mlp deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(kMagicLen) != std::string(kCheckpointMagic, kMagicLen)) {
    throw DataError("not a checkpoint: bad magic");
  }
  const auto version = r.uint(4);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  MlpSpec spec;
  spec.input_dim = r.uint(8);
  const auto hidden = r.uint(8);
  if (hidden > 1024) throw DataError("checkpoint declares an implausible layer count");
  for (std::uint64_t i = 0; i < hidden; ++i) spec.hidden_dims.push_back(r.uint(8));
  spec.num_classes = r.uint(8);
  spec.seed = r.uint(8);
  const auto count = r.uint(8);
  if (count != 2 * (hidden + 1)) throw DataError("checkpoint buffer count does not match its spec");
  std::vector<Tensor> params;
  for (std::uint64_t b = 0; b < count; ++b) {
    const auto rows = r.uint(8);
    const auto cols = r.uint(8);
    if (rows > kMaxDim || cols > kMaxDim) throw DataError("checkpoint buffer is implausibly large");
    r.need(rows * cols * 8);
    std::vector<double> values(rows * cols);
    for (double& v : values) v = r.f64();
    if (b % 2 == 0) {
      params.push_back(Tensor::matrix(rows, cols, std::move(values), true));
    } else {
      params.push_back(Tensor::from({rows * cols}, std::move(values), true));
    }
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  try {
    return Mlp(std::move(spec), std::move(params));
  } catch (const Error& e) {
    throw DataError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Mlp& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes);
}

}  // namespace ldrld
