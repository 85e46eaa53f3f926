#include "ldrld/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ldrld/errors.hpp"

namespace ldrld::cli {

namespace {

Json train_json(const TrainSpec& t) {
  return Json{{"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"lr", t.lr},
              {"momentum", t.momentum},
              {"weight_decay", t.weight_decay},
              {"warmup_epochs", t.warmup_epochs},
              {"lr_drop_epochs", t.lr_drop_epochs},
              {"lr_drop_factor", t.lr_drop_factor}};
}

std::string method_name(Method m) { return m == Method::ldrld ? "ldrld" : "vanilla_kd"; }

// Typed field access with the dotted path in every error message.
template <typename T>
T get(const Json& node, const std::string& path, const char* key) {
  const Json& v = node.at(key);
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigError("");
        }
      }
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key " + path + "." + key + " has the wrong type or sign: " + v.dump());
  }
}

std::vector<std::size_t> get_sizes(const Json& node, const std::string& path, const char* key) {
  const Json& v = node.at(key);
  if (!v.is_array()) throw ConfigError("config key " + path + "." + key + " must be a list");
  std::vector<std::size_t> out;
  for (const Json& e : v) {
    if (!e.is_number_unsigned()) {
      throw ConfigError("config key " + path + "." + key + " must hold non-negative integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

TrainSpec parse_train(const Json& node, const std::string& path) {
  TrainSpec t;
  t.epochs = get<std::size_t>(node, path, "epochs");
  t.batch_size = get<std::size_t>(node, path, "batch_size");
  t.lr = get<double>(node, path, "lr");
  t.momentum = get<double>(node, path, "momentum");
  t.weight_decay = get<double>(node, path, "weight_decay");
  t.warmup_epochs = get<std::size_t>(node, path, "warmup_epochs");
  t.lr_drop_epochs = get_sizes(node, path, "lr_drop_epochs");
  t.lr_drop_factor = get<double>(node, path, "lr_drop_factor");
  try {
    t.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return t;
}

char parse_delimiter(const std::string& s) {
  if (s == "\\t" || s == "tab") return '\t';
  if (s.size() != 1) throw ConfigError("dataset.delimited.delimiter must be one character");
  return s[0];
}

std::string delimiter_name(char c) { return c == '\t' ? "\\t" : std::string(1, c); }

}  // namespace

Json default_config_json() { return to_json(ExperimentConfig{}); }

void merge_config(Json& base, const Json& patch) {
  std::function<void(Json&, const Json&, const std::string&)> rec = [&](Json& b, const Json& p,
                                                                      const std::string& prefix) {
    if (!p.is_object()) throw ConfigError("config section " + (prefix.empty() ? "<root>" : prefix) + " must be an object");
    for (auto it = p.begin(); it != p.end(); ++it) {
      const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (!b.contains(it.key())) throw ConfigError("unknown config key: " + path);
      Json& slot = b[it.key()];
      if (slot.is_object()) {
        rec(slot, it.value(), path);
      } else {
        slot = it.value();
      }
    }
  };
  rec(base, patch, "");
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest.erase(0, pos + 1)) {
    parts.push_back(rest.substr(0, pos));
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, std::move(patch)}};
  // An override replaces a whole section only if it names one explicitly.
  Json probe = doc;
  for (const auto& p : parts) {
    if (!probe.is_object() || !probe.contains(p)) throw ConfigError("unknown config key: " + key);
    probe = probe[p];
  }
  if (probe.is_object()) throw ConfigError("override targets a section, not a value: " + key);
  merge_config(doc, patch);
}

ExperimentConfig parse_config(const Json& doc) {
  Json full = default_config_json();
  merge_config(full, doc);
  ExperimentConfig c;
  try {
    const Json& ds = full.at("dataset");
    c.dataset.kind = get<std::string>(ds, "dataset", "kind");
    c.dataset.seed = get<std::uint64_t>(ds, "dataset", "seed");
    const Json& b = ds.at("blobs");
    c.dataset.blobs.classes = get<std::size_t>(b, "dataset.blobs", "classes");
    c.dataset.blobs.per_class = get<std::size_t>(b, "dataset.blobs", "per_class");
    c.dataset.eval_per_class = get<std::size_t>(b, "dataset.blobs", "eval_per_class");
    c.dataset.blobs.dim = get<std::size_t>(b, "dataset.blobs", "dim");
    c.dataset.blobs.spread = get<double>(b, "dataset.blobs", "spread");
    const Json& d = ds.at("delimited");
    c.dataset.train_path = get<std::string>(d, "dataset.delimited", "train");
    c.dataset.eval_path = get<std::string>(d, "dataset.delimited", "eval");
    c.dataset.delimited.delimiter = parse_delimiter(get<std::string>(d, "dataset.delimited", "delimiter"));
    c.dataset.delimited.label_column = get<int>(d, "dataset.delimited", "label_column");
    c.dataset.delimited.has_header = get<bool>(d, "dataset.delimited", "has_header");
    c.dataset.delimited.num_classes = get<std::size_t>(d, "dataset.delimited", "num_classes");
    const Json& x = ds.at("idx");
    c.dataset.train_images = get<std::string>(x, "dataset.idx", "train_images");
    c.dataset.train_labels = get<std::string>(x, "dataset.idx", "train_labels");
    c.dataset.eval_images = get<std::string>(x, "dataset.idx", "eval_images");
    c.dataset.eval_labels = get<std::string>(x, "dataset.idx", "eval_labels");
    c.dataset.idx_num_classes = get<std::size_t>(x, "dataset.idx", "num_classes");

    const Json& t = full.at("teacher");
    c.teacher.hidden_dims = get_sizes(t, "teacher", "hidden_dims");
    c.teacher.seed = get<std::uint64_t>(t, "teacher", "seed");
    c.teacher.train = parse_train(t.at("train"), "teacher.train");
    const Json& s = full.at("student");
    c.student.hidden_dims = get_sizes(s, "student", "hidden_dims");
    c.student.train = parse_train(s.at("train"), "student.train");

    const Json& k = full.at("distill");
    const auto method = get<std::string>(k, "distill", "method");
    if (method == "ldrld") {
      c.distill.method = Method::ldrld;
    } else if (method == "vanilla_kd") {
      c.distill.method = Method::vanilla_kd;
    } else {
      throw ConfigError("distill.method must be ldrld or vanilla_kd, got " + method);
    }
    c.distill.depth = get<std::size_t>(k, "distill", "depth");
    c.distill.tau = get<double>(k, "distill", "tau");
    c.distill.alpha = get<double>(k, "distill", "alpha");
    c.distill.beta = get<double>(k, "distill", "beta");
    c.distill.gamma = get<double>(k, "distill", "gamma");
    c.distill.adw_enabled = get<bool>(k, "distill", "adw_enabled");
    c.distill.adw.epsilon = get<double>(k, "distill", "epsilon");
    c.distill.adw.delta = get<double>(k, "distill", "delta");
    c.distill.adw.lambda = get<double>(k, "distill", "lambda");
    c.distill.tau_square_scaling = get<bool>(k, "distill", "tau_square_scaling");

    c.out = get<std::string>(full, "", "out");
    const Json& seeds = full.at("seeds");
    if (!seeds.is_array() || seeds.empty()) throw ConfigError("seeds must be a non-empty list");
    c.seeds.clear();
    for (const Json& e : seeds) {
      if (!e.is_number_unsigned()) throw ConfigError("seeds must be non-negative integers");
      c.seeds.push_back(e.get<std::uint64_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  const auto& k = c.dataset.kind;
  if (k != "blobs" && k != "delimited" && k != "idx") {
    throw ConfigError("dataset.kind must be blobs, delimited or idx, got " + k);
  }
  if (k == "delimited" && (c.dataset.train_path.empty() || c.dataset.eval_path.empty())) {
    throw ConfigError("dataset.delimited.train and dataset.delimited.eval are required");
  }
  if (k == "idx" && (c.dataset.train_images.empty() || c.dataset.train_labels.empty() ||
                     c.dataset.eval_images.empty() || c.dataset.eval_labels.empty())) {
    throw ConfigError("dataset.idx needs train_images, train_labels, eval_images and eval_labels");
  }
  if (c.out.empty()) throw ConfigError("out must not be empty");
  try {
    if (k == "blobs") {
      if (c.dataset.blobs.classes < 2 || c.dataset.blobs.per_class == 0 || c.dataset.eval_per_class == 0 ||
          c.dataset.blobs.dim == 0 || !(c.dataset.blobs.spread >= 0.0)) {
        throw InvalidArgument("dataset.blobs needs classes >= 2, positive sizes and spread >= 0");
      }
      c.distill.validate(c.dataset.blobs.classes);
    } else {
      c.distill.validate();
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Json to_json(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  Json doc;
  doc["dataset"] = Json{
      {"kind", d.kind},
      {"seed", d.seed},
      {"blobs",
       {{"classes", d.blobs.classes},
        {"per_class", d.blobs.per_class},
        {"eval_per_class", d.eval_per_class},
        {"dim", d.blobs.dim},
        {"spread", d.blobs.spread}}},
      {"delimited",
       {{"train", d.train_path},
        {"eval", d.eval_path},
        {"delimiter", delimiter_name(d.delimited.delimiter)},
        {"label_column", d.delimited.label_column},
        {"has_header", d.delimited.has_header},
        {"num_classes", d.delimited.num_classes}}},
      {"idx",
       {{"train_images", d.train_images},
        {"train_labels", d.train_labels},
        {"eval_images", d.eval_images},
        {"eval_labels", d.eval_labels},
        {"num_classes", d.idx_num_classes}}}};
  doc["teacher"] = Json{{"hidden_dims", c.teacher.hidden_dims},
                        {"seed", c.teacher.seed},
                        {"train", train_json(c.teacher.train)}};
  doc["student"] = Json{{"hidden_dims", c.student.hidden_dims}, {"train", train_json(c.student.train)}};
  const auto& k = c.distill;
  doc["distill"] = Json{{"method", method_name(k.method)},
                        {"depth", k.depth},
                        {"tau", k.tau},
                        {"alpha", k.alpha},
                        {"beta", k.beta},
                        {"gamma", k.gamma},
                        {"adw_enabled", k.adw_enabled},
                        {"epsilon", k.adw.epsilon},
                        {"delta", k.adw.delta},
                        {"lambda", k.adw.lambda},
                        {"tau_square_scaling", k.tau_square_scaling}};
  doc["out"] = c.out;
  doc["seeds"] = c.seeds;
  return doc;
}

Json load_config_document(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  Json doc = default_config_json();
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    Json patch = Json::parse(in, nullptr, false, true);
    if (patch.is_discarded()) throw ConfigError("config file is not valid JSON: " + file.string());
    merge_config(doc, patch);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return doc;
}

namespace {

std::uint64_t parse_u64(std::string_view s, const std::string& context) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("expected a non-negative integer in " + context + ", got '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = parse_u64(std::string_view(text).substr(0, dots), "--seeds");
    const auto hi = parse_u64(std::string_view(text).substr(dots + 2), "--seeds");
    if (hi < lo) throw ConfigError("empty seed range " + text);
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  } else {
    for (const auto& part : split(text, ',')) out.push_back(parse_u64(part, "--seeds"));
  }
  if (out.empty()) throw ConfigError("--seeds is empty");
  return out;
}

SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError("--sweep must look like key=a..b or key=v1,v2: " + text);
  }
  SweepSpec out;
  out.key = text.substr(0, eq);
  if (out.key == "d" || out.key == "depth") out.key = "distill.depth";
  const std::string rhs = text.substr(eq + 1);
  if (const auto dots = rhs.find(".."); dots != std::string::npos && rhs.find(',') == std::string::npos) {
    const auto lo = parse_u64(std::string_view(rhs).substr(0, dots), "--sweep");
    const auto hi = parse_u64(std::string_view(rhs).substr(dots + 2), "--sweep");
    if (hi < lo) throw ConfigError("empty sweep range " + rhs);
    for (auto v = lo; v <= hi; ++v) out.values.push_back(std::to_string(v));
  } else {
    out.values = split(rhs, ',');
    for (const auto& v : out.values) {
      if (v.empty()) throw ConfigError("empty value in --sweep " + text);
    }
  }
  return out;
}

}  // namespace ldrld::cli
