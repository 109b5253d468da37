#include "stk/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace stk {

using nlohmann::json;

void PipelineConfig::validate() const {
  if (sampler.fanout < 1 || sampler.depth < 1 || sampler.window < 1)
    throw config_error("config: sampler fields must be >= 1");
  if (rules.walks_per_relation < 1 || rules.max_body_len < 1 || rules.top_n_per_head < 1 ||
      rules.max_events < 1)
    throw config_error("config: rules fields must be >= 1");
  if (rules.min_confidence < 0.0 || rules.min_confidence > 1.01)
    throw config_error("config: rules.min_confidence outside [0, 1.01]");
  if (encoder.d_g < 1 || encoder.epochs < 0) throw config_error("config: encoder fields invalid");
  if (backbone.d_t < 1 || backbone.n_layers < 1 || backbone.n_heads < 1 ||
      backbone.d_t % backbone.n_heads != 0)
    throw config_error("config: backbone dims invalid (d_t divisible by n_heads)");
  if (adapter.n_experts < 1 || adapter.top_k < 1 || adapter.top_k > adapter.n_experts ||
      adapter.d_k < 1)
    throw config_error("config: adapter needs n >= k >= 1 and d_k >= 1");
  if (training.epochs < 0 || training.lr < 0.0) throw config_error("config: training fields invalid");
  if (inference.beam_width < 1) throw config_error("config: beam width must be >= 1");
  if (inference.lambda < 0.0 || inference.lambda > 1.0)
    throw config_error("config: lambda outside [0,1]");
  if (inference.max_len < 1) throw config_error("config: max_len must be >= 1");
}

AdapterOptions PipelineConfig::adapter_options() const {
  AdapterOptions o;
  o.disable_st_moe = ablation.disable_st_moe;
  o.disable_ea_moe = ablation.disable_ea_moe;
  o.disable_cma_moe = ablation.disable_cma_moe;
  return o;
}

namespace {

json to_json_obj(const PipelineConfig& c) {
  json j;
  j["dataset"] = {{"train", c.dataset.train}, {"valid", c.dataset.valid}, {"test", c.dataset.test}};
  j["sampler"] = {{"fanout", c.sampler.fanout}, {"depth", c.sampler.depth}, {"window", c.sampler.window}};
  j["rules"] = {{"walks_per_relation", c.rules.walks_per_relation},
                {"max_body_len", c.rules.max_body_len},
                {"min_confidence", c.rules.min_confidence},
                {"top_n_per_head", c.rules.top_n_per_head},
                {"max_events", c.rules.max_events},
                {"max_groundings", c.rules.max_groundings}};
  j["encoder"] = {{"d_g", c.encoder.d_g}, {"epochs", c.encoder.epochs}, {"lr", c.encoder.lr},
                  {"window", c.encoder.window}};
  j["backbone"] = {{"d_t", c.backbone.d_t},       {"n_layers", c.backbone.n_layers},
                   {"n_heads", c.backbone.n_heads}, {"d_ffn", c.backbone.d_ffn},
                   {"max_seq_len", c.backbone.max_seq_len},
                   {"pretrain_epochs", c.backbone.pretrain_epochs},
                   {"pretrain_lr", c.backbone.pretrain_lr}};
  j["adapter"] = {{"n_experts", c.adapter.n_experts},
                  {"top_k", c.adapter.top_k},
                  {"d_k", c.adapter.d_k},
                  {"alpha", c.adapter.alpha},
                  {"balance_average", c.adapter.balance_average}};
  j["training"] = {{"epochs", c.training.epochs}, {"lr", c.training.lr}, {"clip", c.training.clip}};
  j["inference"] = {{"beam_width", c.inference.beam_width},
                    {"lambda", c.inference.lambda},
                    {"max_len", c.inference.max_len}};
  j["ablation"] = {{"disable_st_moe", c.ablation.disable_st_moe},
                   {"disable_ea_moe", c.ablation.disable_ea_moe},
                   {"disable_cma_moe", c.ablation.disable_cma_moe},
                   {"disable_hybrid_score", c.ablation.disable_hybrid_score},
                   {"single_adapter_mode", c.ablation.single_adapter_mode}};
  j["seed"] = c.seed;
  return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void from_json_obj(const json& j, PipelineConfig& c) {
  if (j.contains("dataset")) {
    maybe(j["dataset"], "train", c.dataset.train);
    maybe(j["dataset"], "valid", c.dataset.valid);
    maybe(j["dataset"], "test", c.dataset.test);
  }
  if (j.contains("sampler")) {
    maybe(j["sampler"], "fanout", c.sampler.fanout);
    maybe(j["sampler"], "depth", c.sampler.depth);
    maybe(j["sampler"], "window", c.sampler.window);
  }
  if (j.contains("rules")) {
    maybe(j["rules"], "walks_per_relation", c.rules.walks_per_relation);
    maybe(j["rules"], "max_body_len", c.rules.max_body_len);
    maybe(j["rules"], "min_confidence", c.rules.min_confidence);
    maybe(j["rules"], "top_n_per_head", c.rules.top_n_per_head);
    maybe(j["rules"], "max_events", c.rules.max_events);
    maybe(j["rules"], "max_groundings", c.rules.max_groundings);
  }
  if (j.contains("encoder")) {
    maybe(j["encoder"], "d_g", c.encoder.d_g);
    maybe(j["encoder"], "epochs", c.encoder.epochs);
    maybe(j["encoder"], "lr", c.encoder.lr);
    maybe(j["encoder"], "window", c.encoder.window);
  }
  if (j.contains("backbone")) {
    maybe(j["backbone"], "d_t", c.backbone.d_t);
    maybe(j["backbone"], "n_layers", c.backbone.n_layers);
    maybe(j["backbone"], "n_heads", c.backbone.n_heads);
    maybe(j["backbone"], "d_ffn", c.backbone.d_ffn);
    maybe(j["backbone"], "max_seq_len", c.backbone.max_seq_len);
    maybe(j["backbone"], "pretrain_epochs", c.backbone.pretrain_epochs);
    maybe(j["backbone"], "pretrain_lr", c.backbone.pretrain_lr);
  }
  if (j.contains("adapter")) {
    maybe(j["adapter"], "n_experts", c.adapter.n_experts);
    maybe(j["adapter"], "top_k", c.adapter.top_k);
    maybe(j["adapter"], "d_k", c.adapter.d_k);
    maybe(j["adapter"], "alpha", c.adapter.alpha);
    maybe(j["adapter"], "balance_average", c.adapter.balance_average);
  }
  if (j.contains("training")) {
    maybe(j["training"], "epochs", c.training.epochs);
    maybe(j["training"], "lr", c.training.lr);
    maybe(j["training"], "clip", c.training.clip);
  }
  if (j.contains("inference")) {
    maybe(j["inference"], "beam_width", c.inference.beam_width);
    maybe(j["inference"], "lambda", c.inference.lambda);
    maybe(j["inference"], "max_len", c.inference.max_len);
  }
  if (j.contains("ablation")) {
    maybe(j["ablation"], "disable_st_moe", c.ablation.disable_st_moe);
    maybe(j["ablation"], "disable_ea_moe", c.ablation.disable_ea_moe);
    maybe(j["ablation"], "disable_cma_moe", c.ablation.disable_cma_moe);
    maybe(j["ablation"], "disable_hybrid_score", c.ablation.disable_hybrid_score);
    maybe(j["ablation"], "single_adapter_mode", c.ablation.single_adapter_mode);
  }
  maybe(j, "seed", c.seed);
}

}  // namespace

std::string PipelineConfig::to_json() const { return to_json_obj(*this).dump(2); }

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw missing_artifact_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  PipelineConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config parse failure: ") + e.what());
  }
  try {
    from_json_obj(j, c);
  } catch (const json::exception& e) {
    throw config_error(std::string("config field error: ") + e.what());
  }
  return c;
}

void PipelineConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw config_error("override must look like section.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json obj = to_json_obj(*this);
  json* node = &obj;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->contains(key)) throw config_error("unknown config key: " + path);
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    if (node->is_string())
      *node = value;
    else
      *node = json::parse(value);
  } catch (const json::exception&) {
    throw config_error("cannot parse override value for " + path + ": " + value);
  }
  PipelineConfig fresh;
  try {
    from_json_obj(obj, fresh);
  } catch (const json::exception& e) {
    throw config_error(std::string("override type error for ") + path + ": " + e.what());
  }
  *this = fresh;
}

}  // namespace stk
