#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace grpolab::cli {

namespace {

std::string field_name(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ConfigError(field + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

using Setter = std::function<void(RunConfig&, const std::string& field, const std::string& text)>;

template <typename T>
Setter number(T RunConfig::*section_ptr, auto member) {
  return [=](RunConfig& c, const std::string& field, const std::string& text) {
    using V = std::remove_reference_t<decltype((c.*section_ptr).*member)>;
    (c.*section_ptr).*member = parse_number<V>(field, text);
  };
}

template <typename F>
Setter parsed(F assign) {
  return [=](RunConfig& c, const std::string& field, const std::string& text) {
    try {
      assign(c, text);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(field + ": " + e.what());
    }
  };
}

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"task",
       {{"family", parsed([](RunConfig& c, const std::string& v) {
           if (v != "needle" && v != "kofv") {
             throw std::invalid_argument("family must be 'needle' or 'kofv'");
           }
           c.task.family = v;
         })},
        {"vocab_size", number(&RunConfig::task, &TaskConfig::vocab_size)},
        {"seq_len", number(&RunConfig::task, &TaskConfig::seq_len)},
        {"k", number(&RunConfig::task, &TaskConfig::k)},
        {"num_prompts", number(&RunConfig::task, &TaskConfig::num_prompts)},
        {"seed", number(&RunConfig::task, &TaskConfig::seed)}}},
      {"objective",
       {{"kind", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.objective.kind = parse_objective_kind(v);
         })},
        {"clip_eps", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.objective.clip_eps = parse_number<double>("clip_eps", v);
         })},
        {"adv_eps", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.objective.adv_eps = parse_number<double>("adv_eps", v);
         })},
        {"beta", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.objective.beta = parse_number<double>("beta", v);
         })},
        {"ppo_baseline", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.objective.ppo_baseline = parse_number<double>("ppo_baseline", v);
         })},
        {"surrogate", parsed([](RunConfig& c, const std::string& v) {
           if (v == "default") {
             c.trainer.objective.surrogate.reset();
           } else {
             c.trainer.objective.surrogate = parse_surrogate_form(v);
           }
         })},
        {"vpg_form", parsed([](RunConfig& c, const std::string& v) {
           if (v == "log_prob") {
             c.trainer.objective.vpg_form = VpgForm::log_prob;
           } else if (v == "literal_prob") {
             c.trainer.objective.vpg_form = VpgForm::literal_prob;
           } else {
             throw std::invalid_argument("vpg_form must be 'log_prob' or 'literal_prob'");
           }
         })}}},
      {"trainer",
       {{"prompts_per_batch", number(&RunConfig::trainer, &TrainConfig::prompts_per_batch)},
        {"group_size", number(&RunConfig::trainer, &TrainConfig::group_size)},
        {"base_lr", number(&RunConfig::trainer, &TrainConfig::base_lr)},
        {"lr_scaling", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.lr_scaling = parse_lr_scaling(v);
         })},
        {"reference_prompts", number(&RunConfig::trainer, &TrainConfig::reference_prompts)},
        {"epochs", number(&RunConfig::trainer, &TrainConfig::epochs)},
        {"seed", number(&RunConfig::trainer, &TrainConfig::seed)},
        {"optimizer", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.optimizer = parse_optimizer_kind(v);
         })},
        {"adam_beta1", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.adam.beta1 = parse_number<double>("adam_beta1", v);
         })},
        {"adam_beta2", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.adam.beta2 = parse_number<double>("adam_beta2", v);
         })},
        {"adam_delta", parsed([](RunConfig& c, const std::string& v) {
           c.trainer.adam.delta = parse_number<double>("adam_delta", v);
         })},
        {"warmup_steps", number(&RunConfig::trainer, &TrainConfig::warmup_steps)},
        {"updates_per_batch", number(&RunConfig::trainer, &TrainConfig::updates_per_batch)}}},
      {"output", {{"dir", [](RunConfig& c, const std::string&, const std::string& v) {
                     c.output_dir = v;
                   }}}},
  };
  return table;
}

std::string g17(double x) { return fmt::format("{:.17g}", x); }

}  // namespace

TaskSpec TaskConfig::build() const {
  if (family == "kofv") return make_kofv_task(vocab_size, seq_len, k, num_prompts);
  Rng rng(seed);
  return make_needle_task(vocab_size, seq_len, num_prompts, rng);
}

void RunConfig::validate() const {
  try {
    (void)task.build();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[task]: ") + e.what());
  }
  try {
    trainer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[trainer]/[objective]: ") + e.what());
  }
}

RunConfig parse_run_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  RunConfig config;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    const auto found = table.find(section);
    if (found == table.end() || !body.data().empty()) {
      throw ConfigError("unknown section or key outside a section: '" + section + "'");
    }
    for (const auto& [key, value] : body) {
      const auto setter = found->second.find(key);
      const auto field = field_name(section, key);
      if (setter == found->second.end()) throw ConfigError(field + ": unknown key");
      setter->second(config, field, value.get_value<std::string>());
    }
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  return parse_run_config(in);
}

std::string format_run_config(const RunConfig& c) {
  const auto& t = c.trainer;
  const auto& o = t.objective;
  std::string out;
  out += "[task]\n";
  out += fmt::format("family = {}\n", c.task.family);
  out += fmt::format("vocab_size = {}\n", c.task.vocab_size);
  out += fmt::format("seq_len = {}\n", c.task.seq_len);
  out += fmt::format("k = {}\n", c.task.k);
  out += fmt::format("num_prompts = {}\n", c.task.num_prompts);
  out += fmt::format("seed = {}\n", c.task.seed);
  out += "\n[objective]\n";
  out += fmt::format("kind = {}\n", to_string(o.kind));
  out += fmt::format("clip_eps = {}\n", g17(o.clip_eps));
  out += fmt::format("adv_eps = {}\n", g17(o.adv_eps));
  out += fmt::format("beta = {}\n", g17(o.beta));
  out += fmt::format("ppo_baseline = {}\n", g17(o.ppo_baseline));
  out += fmt::format("surrogate = {}\n", o.surrogate ? to_string(*o.surrogate) : "default");
  out += fmt::format("vpg_form = {}\n",
                     o.vpg_form == VpgForm::log_prob ? "log_prob" : "literal_prob");
  out += "\n[trainer]\n";
  out += fmt::format("prompts_per_batch = {}\n", t.prompts_per_batch);
  out += fmt::format("group_size = {}\n", t.group_size);
  out += fmt::format("base_lr = {}\n", g17(t.base_lr));
  out += fmt::format("lr_scaling = {}\n", to_string(t.lr_scaling));
  out += fmt::format("reference_prompts = {}\n", t.reference_prompts);
  out += fmt::format("epochs = {}\n", t.epochs);
  out += fmt::format("seed = {}\n", t.seed);
  out += fmt::format("optimizer = {}\n", to_string(t.optimizer));
  out += fmt::format("adam_beta1 = {}\n", g17(t.adam.beta1));
  out += fmt::format("adam_beta2 = {}\n", g17(t.adam.beta2));
  out += fmt::format("adam_delta = {}\n", g17(t.adam.delta));
  out += fmt::format("warmup_steps = {}\n", t.warmup_steps);
  out += fmt::format("updates_per_batch = {}\n", t.updates_per_batch);
  if (!c.output_dir.empty()) {
    out += "\n[output]\n";
    out += fmt::format("dir = {}\n", c.output_dir);
  }
  return out;
}

}  // namespace grpolab::cli
