#include "ldrld/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "ldrld/errors.hpp"
#include "seeding.hpp"

namespace ldrld {

void Dataset::validate() const {
  if (num_samples == 0) throw DataError("dataset is empty");
  if (dim == 0) throw DataError("dataset has zero feature dimensions");
  if (num_classes < 2) throw DataError("dataset needs at least 2 classes");
  if (features.size() != num_samples * dim) throw DataError("feature buffer size mismatch");
  if (labels.size() != num_samples) throw DataError("label count mismatch");
  for (std::size_t i = 0; i < num_samples; ++i) {
    if (labels[i] >= num_classes) {
      throw DataError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                      " is not below class count " + std::to_string(num_classes));
    }
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw DataError("dataset contains non-finite features");
  }
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size() * dim);
  for (std::size_t i : indices) {
    auto row = sample(i);
    out.insert(out.end(), row.begin(), row.end());
  }
  return Tensor::matrix(indices.size(), dim, std::move(out));
}

std::vector<std::size_t> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels[i]);
  return out;
}

Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed, Split split) {
  if (spec.classes < 2) throw InvalidArgument("blobs need at least 2 classes");
  if (spec.per_class == 0 || spec.dim == 0) throw InvalidArgument("blob counts and dims must be positive");
  if (!(spec.spread >= 0.0)) throw InvalidArgument("blob spread must be >= 0");

  auto mean_rng = detail::seeded_rng({seed, 0});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> means(spec.classes * spec.dim);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    double norm = 0.0;
    for (std::size_t k = 0; k < spec.dim; ++k) {
      const double v = normal(mean_rng);
      means[c * spec.dim + k] = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < spec.dim; ++k) means[c * spec.dim + k] /= norm;
  }

  auto noise_rng = detail::seeded_rng({seed, split == Split::train ? 1u : 2u});
  Dataset out;
  out.num_samples = spec.classes * spec.per_class;
  out.dim = spec.dim;
  out.num_classes = spec.classes;
  out.split = split;
  out.features.reserve(out.num_samples * spec.dim);
  out.labels.reserve(out.num_samples);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t n = 0; n < spec.per_class; ++n) {
      for (std::size_t k = 0; k < spec.dim; ++k) {
        out.features.push_back(means[c * spec.dim + k] + spec.spread * normal(noise_rng));
      }
      out.labels.push_back(c);
    }
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto not_space = [](char ch) { return ch != ' ' && ch != '\t' && ch != '\r'; };
  const auto b = std::find_if(s.begin(), s.end(), not_space);
  const auto e = std::find_if(s.rbegin(), s.rend(), not_space).base();
  return b < e ? std::string_view(&*b, static_cast<std::size_t>(e - b)) : std::string_view{};
}

std::vector<std::string_view> split_line(std::string_view line, char delimiter) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    cells.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

Dataset load_delimited(const std::filesystem::path& path, const DelimitedOptions& opts, Split split) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open delimited file " + path.string());

  Dataset out;
  out.split = split;
  std::size_t columns = 0;
  std::size_t label_col = 0;
  std::size_t max_label = 0;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = opts.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto cells = split_line(line, opts.delimiter);
    if (columns == 0) {
      columns = cells.size();
      if (columns < 2) throw DataError(where(path, line_no) + ": need at least one feature and a label");
      const long long lc = opts.label_column < 0 ? static_cast<long long>(columns) + opts.label_column
                                                 : opts.label_column;
      if (lc < 0 || lc >= static_cast<long long>(columns)) {
        throw DataError(where(path, line_no) + ": label column out of range");
      }
      label_col = static_cast<std::size_t>(lc);
      out.dim = columns - 1;
    } else if (cells.size() != columns) {
      throw DataError(where(path, line_no) + ": expected " + std::to_string(columns) +
                      " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < columns; ++c) {
      const auto cell = cells[c];
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (c == label_col) {
        long long label = -1;
        auto [ptr, ec] = std::from_chars(first, last, label);
        if (ec != std::errc() || ptr != last || cell.empty() || label < 0) {
          throw DataError(where(path, line_no) + ": invalid label '" + std::string(cell) + "'");
        }
        out.labels.push_back(static_cast<std::size_t>(label));
        max_label = std::max(max_label, static_cast<std::size_t>(label));
      } else {
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || cell.empty() || !std::isfinite(value)) {
          throw DataError(where(path, line_no) + ": non-numeric feature '" + std::string(cell) + "'");
        }
        out.features.push_back(value);
      }
    }
    ++out.num_samples;
  }
  out.num_classes = opts.num_classes != 0 ? opts.num_classes : max_label + 1;
  try {
    out.validate();
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

void write_delimited(const Dataset& data, const std::filesystem::path& path, char delimiter) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < data.num_samples; ++i) {
    for (double v : data.sample(i)) {
      auto res = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, res.ptr - buf);
      out.put(delimiter);
    }
    out << data.labels[i] << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t num_classes, Split split) {
  const auto img = read_bytes(images);
  const auto lab = read_bytes(labels);
  if (img.size() < 16) throw DataError(images.string() + ": truncated IDX header");
  if (lab.size() < 8) throw DataError(labels.string() + ": truncated IDX header");
  if (read_be32(img, 0) != kIdxImages) throw DataError(images.string() + ": bad IDX image magic");
  if (read_be32(lab, 0) != kIdxLabels) throw DataError(labels.string() + ": bad IDX label magic");

  const std::size_t count = read_be32(img, 4);
  const std::size_t rows = read_be32(img, 8);
  const std::size_t cols = read_be32(img, 12);
  const std::size_t label_count = read_be32(lab, 4);
  if (count != label_count) {
    throw DataError("IDX record counts differ: " + std::to_string(count) + " images vs " +
                    std::to_string(label_count) + " labels");
  }
  const std::size_t dim = rows * cols;
  if (img.size() < 16 + count * dim) throw DataError(images.string() + ": truncated image data");
  if (lab.size() < 8 + count) throw DataError(labels.string() + ": truncated label data");

  Dataset out;
  out.split = split;
  out.num_samples = count;
  out.dim = dim;
  out.features.resize(count * dim);
  for (std::size_t i = 0; i < count * dim; ++i) out.features[i] = img[16 + i] / 255.0;
  out.labels.resize(count);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    out.labels[i] = lab[8 + i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.num_classes = num_classes != 0 ? num_classes : max_label + 1;
  out.validate();
  return out;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = detail::seeded_rng({seed, epoch, 0x5eed});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace ldrld
