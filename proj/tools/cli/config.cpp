#include "config.hpp"

#include <set>

#include <fmt/core.h>

#include "unicat/errors.hpp"
#include "unicat/io.hpp"
#include "unicat/rng.hpp"

namespace unicat::cli {

using nlohmann::json;

namespace {

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are read as size_t");

// Reads the keys of one JSON object, remembering which were consumed so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("config: '{}' must be an object", path_));
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const char* key, std::size_t& dst) {
    if (const json* v = raw(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0) {
        throw ConfigError(fmt::format("config: '{}' must be a non-negative integer", where(key)));
      }
      dst = v->get<std::size_t>();
    }
  }
  void read(const char* key, double& dst) {
    if (const json* v = raw(key)) {
      if (!v->is_number()) throw ConfigError(fmt::format("config: '{}' must be a number", where(key)));
      dst = v->get<double>();
    }
  }
  void read(const char* key, bool& dst) {
    if (const json* v = raw(key)) {
      if (!v->is_boolean()) throw ConfigError(fmt::format("config: '{}' must be a boolean", where(key)));
      dst = v->get<bool>();
    }
  }
  void read(const char* key, std::string& dst) {
    if (const json* v = raw(key)) {
      if (!v->is_string()) throw ConfigError(fmt::format("config: '{}' must be a string", where(key)));
      dst = v->get<std::string>();
    }
  }
  template <typename T>
  void read(const char* key, std::vector<T>& dst) {
    if (const json* v = raw(key)) {
      if (!v->is_array()) throw ConfigError(fmt::format("config: '{}' must be an array", where(key)));
      std::vector<T> out;
      for (std::size_t i = 0; i < v->size(); ++i) {
        json wrapper = json::object();
        wrapper["x"] = (*v)[i];
        Section item(wrapper, fmt::format("{}[{}]", where(key), i));
        T value{};
        item.read("x", value);
        out.push_back(value);
      }
      dst = std::move(out);
    }
  }

  std::string where(const char* key) const {
    return path_.empty() ? std::string(key) : fmt::format("{}.{}", path_, key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError(fmt::format("config: unknown key '{}'", where(key.c_str())));
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ModalitySpec parse_modality(const json& j, const std::string& path) {
  Section s(j, path);
  ModalitySpec m;
  s.read("name", m.name);
  s.read("obs_dim", m.obs_dim);
  s.read("signal_scale", m.signal_scale);
  s.read("noise_sigma", m.noise_sigma);
  s.read("spurious_dim", m.spurious_dim);
  s.read("spurious_strength", m.spurious_strength);
  s.finish();
  if (m.name.empty()) throw ConfigError(fmt::format("config: '{}.name' is required", path));
  return m;
}

void parse_data(const json& j, ExperimentConfig& cfg) {
  Section s(j, "data");
  std::string preset = "clean";
  s.read("preset", preset);
  if (preset == "clean") {
    cfg.data = clean_preset();
  } else if (preset == "weak-link") {
    cfg.data = weak_link_preset();
  } else {
    throw ConfigError(fmt::format("config: unknown data.preset '{}' (expected clean, weak-link)",
                                  preset));
  }
  SynthConfig& d = cfg.data;
  s.read("seed", d.seed);
  s.read("latent_dim", d.latent_dim);
  s.read("ids_train", d.ids_train);
  s.read("ids_test", d.ids_test);
  s.read("views_per_id", d.views_per_id);
  s.read("view_jitter", d.view_jitter);
  s.read("query_views", d.query_views);
  if (const json* mods = s.raw("modalities")) {
    if (!mods->is_array()) throw ConfigError("config: 'data.modalities' must be an array");
    d.modalities.clear();
    for (std::size_t i = 0; i < mods->size(); ++i) {
      d.modalities.push_back(parse_modality((*mods)[i], fmt::format("data.modalities[{}]", i)));
    }
  }
  if (const json* rep = s.raw("replicate"); rep != nullptr && !rep->is_null()) {
    Section r(*rep, "data.replicate");
    Replication out;
    r.read("modality", out.modality);
    r.read("copies", out.copies);
    r.finish();
    if (out.copies < 1) throw ConfigError("config: 'data.replicate.copies' must be >= 1");
    cfg.replicate = out;
  }
  s.finish();
  validate(d);
  if (cfg.replicate && cfg.replicate->modality >= d.modalities.size()) {
    throw ConfigError("config: 'data.replicate.modality' is out of range");
  }
}

void parse_train(const json& j, TrainConfig& t) {
  Section s(j, "train");
  if (const json* v = s.raw("strategy")) {
    if (!v->is_string()) throw ConfigError("config: 'train.strategy' must be a string");
    t.strategy = parse_strategy(v->get<std::string>());
  }
  s.read("P", t.P);
  s.read("K", t.K);
  s.read("lr_base", t.lr_base);
  s.read("momentum", t.momentum);
  s.read("epochs", t.epochs);
  s.read("warmup_epochs", t.warmup_epochs);
  s.read("lambda", t.loss.lambda);
  s.read("alpha", t.loss.alpha);
  s.read("hidden", t.arch.hidden);
  s.read("embed_dim", t.arch.embed_dim);
  s.read("bn_momentum", t.arch.bn_momentum);
  s.read("bn_eps", t.arch.bn_eps);
  s.read("seed", t.seed);
  s.finish();
  validate(t);
}

void parse_grid(const json& j, ExperimentConfig& cfg) {
  if (j.is_null()) return;
  Section s(j, "grid");
  GridConfig g;
  s.read("batch_sizes", g.batch_sizes);
  s.read("learning_rates", g.learning_rates);
  s.read("validation_fraction", g.validation_fraction);
  s.read("validation_query_views", g.validation_query_views);
  s.finish();
  if (g.batch_sizes.empty() || g.learning_rates.empty()) {
    throw ConfigError("config: 'grid' needs at least one batch size and one learning rate");
  }
  if (!(g.validation_fraction > 0.0 && g.validation_fraction < 1.0)) {
    throw ConfigError("config: 'grid.validation_fraction' must be in (0, 1)");
  }
  cfg.grid = g;
}

void parse_eval(const json& j, ExperimentConfig& cfg) {
  Section s(j, "eval");
  s.read("exclude_same_view", cfg.eval.cmc.exclude_same_view);
  s.read("max_rank", cfg.eval.cmc.max_rank);
  if (const json* v = s.raw("normalize_before_fusion"); v != nullptr && !v->is_null()) {
    if (!v->is_boolean()) {
      throw ConfigError("config: 'eval.normalize_before_fusion' must be a boolean or null");
    }
    cfg.eval.inference.normalize_before_fusion = v->get<bool>();
  }
  s.read("trainset_query_views", cfg.trainset_query_views);
  s.finish();
  if (cfg.eval.cmc.max_rank == 0) throw ConfigError("config: 'eval.max_rank' must be >= 1");
}

json data_json(const SynthConfig& d) {
  json mods = json::array();
  for (const auto& m : d.modalities) {
    mods.push_back({{"name", m.name},
                    {"obs_dim", m.obs_dim},
                    {"signal_scale", m.signal_scale},
                    {"noise_sigma", m.noise_sigma},
                    {"spurious_dim", m.spurious_dim},
                    {"spurious_strength", m.spurious_strength}});
  }
  return {{"seed", d.seed},
          {"latent_dim", d.latent_dim},
          {"ids_train", d.ids_train},
          {"ids_test", d.ids_test},
          {"views_per_id", d.views_per_id},
          {"view_jitter", d.view_jitter},
          {"query_views", d.query_views},
          {"modalities", mods}};
}

json train_json(const TrainConfig& t) {
  return {{"strategy", std::string(to_string(t.strategy))},
          {"P", t.P},
          {"K", t.K},
          {"lr_base", t.lr_base},
          {"momentum", t.momentum},
          {"epochs", t.epochs},
          {"warmup_epochs", t.warmup_epochs},
          {"lambda", t.loss.lambda},
          {"alpha", t.loss.alpha},
          {"hidden", t.arch.hidden},
          {"embed_dim", t.arch.embed_dim},
          {"bn_momentum", t.arch.bn_momentum},
          {"bn_eps", t.arch.bn_eps},
          {"seed", t.seed}};
}

json eval_json(const EvalOptions& e, std::size_t trainset_query_views) {
  json j = {{"exclude_same_view", e.cmc.exclude_same_view},
            {"max_rank", e.cmc.max_rank},
            {"normalize_before_fusion", nullptr},
            {"trainset_query_views", trainset_query_views}};
  if (e.inference.normalize_before_fusion) {
    j["normalize_before_fusion"] = *e.inference.normalize_before_fusion;
  }
  return j;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  Section top(doc, "");
  ExperimentConfig cfg;
  cfg.data = clean_preset();
  if (const json* d = top.raw("data")) parse_data(*d, cfg);
  if (const json* t = top.raw("train")) parse_train(*t, cfg.train);
  if (const json* g = top.raw("grid")) parse_grid(*g, cfg);
  if (const json* e = top.raw("eval")) parse_eval(*e, cfg);
  top.finish();
  if (cfg.grid) {
    for (std::size_t bs : cfg.grid->batch_sizes) {
      if (bs % cfg.train.K != 0 || bs / cfg.train.K < 2) {
        throw ConfigError(fmt::format(
            "config: grid batch size {} must be a multiple of train.K = {} with P >= 2", bs,
            cfg.train.K));
      }
    }
  }
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config: invalid JSON: {}", e.what()));
  }
  return parse_config(doc);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config_text(text);
}

json to_json(const ExperimentConfig& cfg) {
  json data = data_json(cfg.data);
  data["replicate"] = nullptr;
  if (cfg.replicate) {
    data["replicate"] = {{"modality", cfg.replicate->modality}, {"copies", cfg.replicate->copies}};
  }
  json grid = nullptr;
  if (cfg.grid) {
    grid = {{"batch_sizes", cfg.grid->batch_sizes},
            {"learning_rates", cfg.grid->learning_rates},
            {"validation_fraction", cfg.grid->validation_fraction},
            {"validation_query_views", cfg.grid->validation_query_views}};
  }
  return {{"data", data},
          {"train", train_json(cfg.train)},
          {"grid", grid},
          {"eval", eval_json(cfg.eval, cfg.trainset_query_views)}};
}

json to_json(const SuiteConfig& suite) {
  json strategies = json::array();
  for (Strategy s : suite.strategies) strategies.push_back(std::string(to_string(s)));
  json j = {{"suite", std::string(to_string(suite.kind))},
            {"data", data_json(suite.data)},
            {"train", train_json(suite.train)},
            {"eval", eval_json(suite.eval, suite.trainset_query_views)},
            {"strategies", strategies}};
  if (suite.kind == SuiteKind::Ensemble) {
    j["data"]["replicate"] = {{"modality", suite.ensemble_modality},
                              {"copies", suite.ensemble_copies}};
  }
  return j;
}

std::uint64_t config_hash(const json& canonical) { return fnv1a64(canonical.dump()); }

std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

MultimodalDataset build_dataset(const ExperimentConfig& cfg) {
  MultimodalDataset ds = make_dataset(cfg.data);
  if (cfg.replicate) ds = replicate_modality(ds, cfg.replicate->modality, cfg.replicate->copies);
  return ds;
}

}  // namespace unicat::cli
