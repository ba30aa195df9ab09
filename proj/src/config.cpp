#include "zcae/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "zcae/error.hpp"

namespace zcae {
namespace {

using nlohmann::json;

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("unknown-key", "unknown key '" + where + "." + k + "'");
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad type for '" + where + "." + key + "'");
  }
}

std::size_t get_size(const json& j, const char* key, const std::string& where, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError("'" + where + "." + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::filesystem::path> paths(const json& j, const char* key, const std::string& where,
                                         const std::filesystem::path& base) {
  std::vector<std::filesystem::path> out;
  if (!j.contains(key)) return out;
  const json& v = j.at(key);
  if (!v.is_array()) throw ConfigError("'" + where + "." + key + "' must be a list of paths");
  for (const auto& p : v) {
    if (!p.is_string()) throw ConfigError("'" + where + "." + key + "' must be a list of paths");
    std::filesystem::path path = p.get<std::string>();
    out.push_back(path.is_relative() && !base.empty() ? base / path : path);
  }
  return out;
}

PoolSpec parse_pool(const json& v, const std::string& where) {
  if (v.is_null()) return {};
  if (v.is_number_unsigned()) return {PoolKind::window, v.get<std::size_t>()};
  if (v.is_string() && v.get<std::string>() == "quadrant") return {PoolKind::quadrant, 0};
  if (v.is_string() && v.get<std::string>() == "none") return {};
  throw ConfigError("'" + where + ".pool' must be a window size, \"quadrant\" or \"none\"");
}

NetworkSpec parse_inline(const json& j) {
  only_keys(j, "network", {"input", "conv", "hidden", "classes"});
  NetworkSpec spec;
  const auto input = get<std::vector<std::size_t>>(j, "input", "network", {});
  if (input.size() != 3) throw ConfigError("'network.input' must be [channels, height, width]");
  spec.in_c = input[0];
  spec.in_h = input[1];
  spec.in_w = input[2];
  if (!j.contains("conv") || !j.at("conv").is_array()) throw ConfigError("'network.conv' must be a list");
  for (std::size_t i = 0; i < j.at("conv").size(); ++i) {
    const json& l = j.at("conv")[i];
    const std::string where = "network.conv[" + std::to_string(i) + "]";
    only_keys(l, where, {"filters", "kernel", "activation", "pool"});
    ConvLayerSpec c;
    c.filters = get_size(l, "filters", where, 0);
    c.kh = c.kw = get_size(l, "kernel", where, 0);
    c.activation = activation_from_string(get<std::string>(l, "activation", where, "relu"));
    c.pool = parse_pool(l.contains("pool") ? l.at("pool") : json(), where);
    spec.conv.push_back(c);
  }
  spec.hidden = get_size(j, "hidden", "network", 0);
  spec.classes = get_size(j, "classes", "network", 0);
  return spec;
}

PhaseConfig parse_phase(const json& j, const std::string& where, PhaseConfig p) {
  only_keys(j, where, {"epochs", "batch_size", "learning_rate", "probe_epochs", "probe_examples",
                       "probe_candidates", "momentum", "weight_decay", "init"});
  p.epochs = get_size(j, "epochs", where, p.epochs);
  p.batch_size = get_size(j, "batch_size", where, p.batch_size);
  if (j.contains("learning_rate") && !j.at("learning_rate").is_null()) {
    p.learning_rate = get<double>(j, "learning_rate", where, 0.0);
    if (!(*p.learning_rate > 0.0)) throw ConfigError("'" + where + ".learning_rate' must be positive");
  }
  p.probe_epochs = get_size(j, "probe_epochs", where, p.probe_epochs);
  p.probe_examples = get_size(j, "probe_examples", where, p.probe_examples);
  p.probe_candidates = get(j, "probe_candidates", where, p.probe_candidates);
  p.momentum = get(j, "momentum", where, p.momentum);
  p.weight_decay = get(j, "weight_decay", where, p.weight_decay);
  if (p.batch_size == 0) throw ConfigError("'" + where + ".batch_size' must be positive");
  if (p.probe_candidates.empty()) throw ConfigError("'" + where + ".probe_candidates' is empty");
  if (p.momentum < 0.0 || p.momentum >= 1.0) throw ConfigError("'" + where + ".momentum' must be in [0,1)");
  if (p.weight_decay < 0.0) throw ConfigError("'" + where + ".weight_decay' must be non-negative");
  return p;
}

std::uint64_t parse_u64(const json& j, const char* key, const std::string& where, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_unsigned()) throw ConfigError("'" + where + "." + key + "' must be an unsigned integer");
  return j.at(key).get<std::uint64_t>();
}

void require_file(const std::filesystem::path& p) {
  if (!std::filesystem::is_regular_file(p)) {
    throw InputError("dataset-not-found", "dataset file not found: " + p.string());
  }
}

LabeledDataset read_labeled(const DataConfig& d, const std::vector<std::filesystem::path>& files) {
  if (d.format == "cifar10") return read_cifar10(files);
  if (files.size() != 2) throw ConfigError("stl10 labeled sets need [images, labels]");
  return read_stl10(files[0], files[1]);
}

}  // namespace

void ExperimentConfig::validate_paths() const {
  for (const auto* list : {&data.train, &data.test, &data.unlabeled})
    for (const auto& p : *list) require_file(p);
  if (init) {
    if (!std::filesystem::is_regular_file(*init)) {
      throw InputError("checkpoint-not-found", "checkpoint not found: " + init->string());
    }
  }
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config-parse", std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(root, "config", {"network", "data", "pretrain", "finetune", "augment", "seeds", "output"});
  ExperimentConfig c;

  if (!root.contains("network")) throw ConfigError("missing 'network' section");
  const json& net = root.at("network");
  if (net.is_string()) {
    c.network_name = net.get<std::string>();
    c.network = network_preset(c.network_name);
  } else if (net.contains("preset")) {
    only_keys(net, "network", {"preset"});
    c.network_name = get<std::string>(net, "preset", "network", "");
    c.network = network_preset(c.network_name);
  } else {
    c.network_name = "inline";
    c.network = parse_inline(net);
  }
  c.network.validate();

  if (root.contains("data")) {
    const json& d = root.at("data");
    only_keys(d, "data", {"format", "train", "test", "unlabeled", "classes", "samples_per_class",
                          "unlabeled_count", "synthetic"});
    c.data.format = get<std::string>(d, "format", "data", c.data.format);
    if (c.data.format != "cifar10" && c.data.format != "stl10" && c.data.format != "synthetic") {
      throw ConfigError("unknown data format '" + c.data.format + "'");
    }
    c.data.train = paths(d, "train", "data", base);
    c.data.test = paths(d, "test", "data", base);
    c.data.unlabeled = paths(d, "unlabeled", "data", base);
    c.data.classes = get(d, "classes", "data", c.data.classes);
    c.data.samples_per_class = get_size(d, "samples_per_class", "data", 0);
    c.data.unlabeled_count = get_size(d, "unlabeled_count", "data", 0);
    if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      only_keys(s, "data.synthetic", {"kind", "train", "test", "unlabeled", "classes"});
      c.data.synthetic.kind = synthetic_kind_from_string(get<std::string>(s, "kind", "data.synthetic", "oriented-bars"));
      c.data.synthetic.train = get_size(s, "train", "data.synthetic", 0);
      c.data.synthetic.test = get_size(s, "test", "data.synthetic", 0);
      c.data.synthetic.unlabeled = get_size(s, "unlabeled", "data.synthetic", 0);
      c.data.synthetic.classes = get_size(s, "classes", "data.synthetic", 2);
    }
  }

  if (root.contains("pretrain")) c.pretrain = parse_phase(root.at("pretrain"), "pretrain", c.pretrain);
  if (root.contains("pretrain") && root.at("pretrain").contains("init")) {
    throw ConfigError("unknown-key", "unknown key 'pretrain.init'");
  }
  if (root.contains("finetune")) {
    const json& f = root.at("finetune");
    c.finetune = parse_phase(f, "finetune", c.finetune);
    if (f.contains("init")) {
      const std::string init = get<std::string>(f, "init", "finetune", "");
      if (init != "random") {
        std::filesystem::path p = init;
        c.init = p.is_relative() && !base.empty() ? base / p : p;
      }
    }
  }

  if (root.contains("augment")) {
    const json& a = root.at("augment");
    only_keys(a, "augment", {"A", "C", "D", "U", "max_shift_fraction", "flip_probability",
                             "contrast_mode", "dropout"});
    c.augment.translate_flip = get(a, "A", "augment", false);
    c.augment.color_contrast = get(a, "C", "augment", false);
    c.dropout_on = get(a, "D", "augment", false);
    c.unsupervised = get(a, "U", "augment", true);
    c.augment.max_shift_fraction = get(a, "max_shift_fraction", "augment", c.augment.max_shift_fraction);
    c.augment.flip_probability = get(a, "flip_probability", "augment", c.augment.flip_probability);
    c.dropout = get(a, "dropout", "augment", c.dropout);
    const std::string mode = get<std::string>(a, "contrast_mode", "augment", "literal");
    if (mode == "literal") {
      c.augment.contrast_mode = ContrastMode::literal;
    } else if (mode == "value") {
      c.augment.contrast_mode = ContrastMode::value;
    } else {
      throw ConfigError("'augment.contrast_mode' must be \"literal\" or \"value\"");
    }
    if (c.dropout < 0.0 || c.dropout >= 1.0) throw ConfigError("'augment.dropout' must be in [0,1)");
    if (c.augment.max_shift_fraction < 0.0 || c.augment.max_shift_fraction >= 1.0) {
      throw ConfigError("'augment.max_shift_fraction' must be in [0,1)");
    }
    if (c.augment.flip_probability < 0.0 || c.augment.flip_probability > 1.0) {
      throw ConfigError("'augment.flip_probability' must be in [0,1]");
    }
  }

  if (root.contains("seeds")) {
    const json& s = root.at("seeds");
    only_keys(s, "seeds", {"run", "subset"});
    c.seed = parse_u64(s, "run", "seeds", 0);
    c.subset_seed = parse_u64(s, "subset", "seeds", 0);
  }
  if (root.contains("output")) {
    std::filesystem::path out = get<std::string>(root, "output", "config", "");
    c.output = out.is_relative() && !base.empty() ? base / out : out;
  }

  if (c.data.format == "stl10") {
    for (const auto* list : {&c.data.train, &c.data.test}) {
      if (!list->empty() && list->size() != 2) throw ConfigError("stl10 train/test need [images, labels]");
    }
    if (c.data.unlabeled.size() > 1) throw ConfigError("stl10 unlabeled takes one images file");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("config-not-found", "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

ExperimentData load_experiment_data(const ExperimentConfig& c, bool want_unlabeled, bool want_labeled) {
  const DataConfig& d = c.data;
  const Shape4 dims{1, c.network.in_c, c.network.in_h, c.network.in_w};
  ExperimentData out;
  auto check_dims = [&](const Tensor4<float>& t, const std::string& what) {
    const Shape4& s = t.shape();
    if (s.n > 0 && (s.c != dims.c || s.h != dims.h || s.w != dims.w)) {
      throw InputError("dataset-mismatch", what + " images are " + s.str() + " but the network expects " +
                                               std::to_string(dims.c) + "x" + std::to_string(dims.h) +
                                               "x" + std::to_string(dims.w));
    }
  };
  auto filter = [&](LabeledDataset ds) {
    if (!d.classes.empty()) ds = select_classes(ds, d.classes);
    return ds;
  };

  if (d.format == "synthetic") {
    const SyntheticConfig& s = d.synthetic;
    const std::uint64_t base = c.subset_seed;
    if (want_labeled) {
      out.train = make_synthetic(s.kind, s.train, dims, derive_seed(base, {1}), s.classes);
      if (s.test > 0) out.test = make_synthetic(s.kind, s.test, dims, derive_seed(base, {2}), s.classes);
    }
    if (want_unlabeled) {
      out.unlabeled = make_synthetic(s.kind, s.unlabeled, dims, derive_seed(base, {3}), s.classes).images;
    }
    return out;
  }

  c.validate_paths();
  LabeledDataset full_train;
  const bool need_train = want_labeled || (want_unlabeled && d.unlabeled.empty());
  if (need_train) {
    if (d.train.empty()) throw ConfigError("'data.train' is required");
    full_train = filter(read_labeled(d, d.train));
    check_dims(full_train.images, "train");
  }
  if (want_labeled) {
    out.train = d.samples_per_class > 0
                    ? sample_subset(full_train, {d.samples_per_class, derive_seed(c.subset_seed, {1})})
                    : full_train;
    if (!d.test.empty()) {
      out.test = filter(read_labeled(d, d.test));
      check_dims(out.test->images, "test");
    }
  }
  if (want_unlabeled) {
    Tensor4<float> pool;
    if (!d.unlabeled.empty()) {
      pool = d.format == "cifar10" ? read_cifar10(d.unlabeled).images : read_stl10(d.unlabeled[0]).images;
    } else {
      pool = full_train.images;
    }
    check_dims(pool, "unlabeled");
    if (d.unlabeled_count > 0) {
      if (d.unlabeled_count > pool.shape().n) {
        throw InputError("subset-insufficient", "requested " + std::to_string(d.unlabeled_count) +
                                                    " unlabeled images, only " +
                                                    std::to_string(pool.shape().n) + " available");
      }
      const auto order = make_batches(pool.shape().n, pool.shape().n, derive_seed(c.subset_seed, {2}), 0);
      std::vector<std::size_t> idx(order.front().begin(),
                                   order.front().begin() + static_cast<std::ptrdiff_t>(d.unlabeled_count));
      pool = gather_images(pool, idx);
    }
    out.unlabeled = std::move(pool);
  }
  return out;
}

}  // namespace zcae
