#include "config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

namespace dagan::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw UsageError("invalid value '" + text + "' for " + key);
  }
  return v;
}

std::vector<std::int64_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) out.push_back(parse_number<std::int64_t>(key, trim(item)));
  if (out.empty()) throw UsageError("empty list for " + key);
  return out;
}

std::string list_text(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string real_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Key {
  std::function<void(Settings&, const std::string&, const std::string&)> set;
  std::function<std::string(const Settings&)> get;
};

template <typename N, typename Field>
Key number(Field field) {
  return {[field](Settings& s, const std::string& k, const std::string& v) { field(s) = parse_number<N>(k, v); },
          [field](const Settings& s) {
            if constexpr (std::is_floating_point_v<N>) {
              return real_text(field(s));
            } else {
              return std::to_string(field(s));
            }
          }};
}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = [] {
    std::map<std::string, Key> k;
    k["seed"] = number<std::uint64_t>([](auto& s) -> auto& { return s.train.seed; });
    k["num_classes"] = number<std::int64_t>([](auto& s) -> auto& { return s.train.num_classes; });
    k["height"] = number<std::int64_t>([](auto& s) -> auto& { return s.train.height; });
    k["width"] = number<std::int64_t>([](auto& s) -> auto& { return s.train.width; });
    k["disc_scales"] = number<int>([](auto& s) -> auto& { return s.train.disc_scales; });
    k["lambda_cgan"] = number<double>([](auto& s) -> auto& { return s.train.weights.lambda_cgan; });
    k["lambda_fm"] = number<double>([](auto& s) -> auto& { return s.train.weights.lambda_f; });
    k["lambda_perc"] = number<double>([](auto& s) -> auto& { return s.train.weights.lambda_p; });
    k["lr_g"] = number<double>([](auto& s) -> auto& { return s.train.lr_g; });
    k["lr_d"] = number<double>([](auto& s) -> auto& { return s.train.lr_d; });
    k["beta1"] = number<double>([](auto& s) -> auto& { return s.train.beta1; });
    k["beta2"] = number<double>([](auto& s) -> auto& { return s.train.beta2; });
    k["eps"] = number<double>([](auto& s) -> auto& { return s.train.eps; });
    k["batch_size"] = number<std::int64_t>([](auto& s) -> auto& { return s.train.batch_size; });
    k["epochs"] = number<std::int64_t>([](auto& s) -> auto& { return s.train.epochs; });
    k["extractor_seed"] = number<std::uint64_t>([](auto& s) -> auto& { return s.train.extractor_seed; });
    k["min_shapes"] = number<int>([](auto& s) -> auto& { return s.min_shapes; });
    k["max_shapes"] = number<int>([](auto& s) -> auto& { return s.max_shapes; });
    k["data_seed"] = number<std::uint64_t>([](auto& s) -> auto& { return s.data_seed; });
    k["checkpoint_every"] = number<std::int64_t>([](auto& s) -> auto& { return s.checkpoint_every; });
    k["gen_widths"] = {[](Settings& s, const std::string& key, const std::string& v) { s.train.gen_widths = parse_list(key, v); },
                       [](const Settings& s) { return list_text(s.train.gen_widths); }};
    k["disc_widths"] = {[](Settings& s, const std::string& key, const std::string& v) { s.train.disc_widths = parse_list(key, v); },
                        [](const Settings& s) { return list_text(s.train.disc_widths); }};
    k["ablation"] = {[](Settings& s, const std::string&, const std::string& v) {
                       try {
                         s.train.attention = AttentionConfig::from_ablation(v);
                       } catch (const std::invalid_argument& e) {
                         throw UsageError(e.what());
                       }
                     },
                     [](const Settings& s) { return s.train.attention.ablation_name(); }};
    k["adv_loss"] = {[](Settings& s, const std::string&, const std::string& v) {
                       try {
                         s.train.adv_loss = parse_adversarial_loss(v);
                       } catch (const std::invalid_argument& e) {
                         throw UsageError(e.what());
                       }
                     },
                     [](const Settings& s) { return std::string(to_string(s.train.adv_loss)); }};
    return k;
  }();
  return table;
}

}  // namespace

SceneConfig Settings::scenes() const {
  SceneConfig c;
  c.num_classes = train.num_classes;
  c.height = train.height;
  c.width = train.width;
  c.min_shapes = min_shapes;
  c.max_shapes = max_shapes;
  c.seed = data_seed;
  return c;
}

void Settings::validate() const {
  try {
    train.validate();
    scenes().validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (checkpoint_every < 1) throw UsageError("checkpoint_every must be positive");
}

void apply(Settings& s, const std::string& key, const std::string& value) {
  std::string k = key;
  for (auto& c : k) if (c == '-') c = '_';
  const auto it = keys().find(k);
  if (it == keys().end()) throw UsageError("unknown config key '" + key + "'");
  it->second.set(s, k, value);
}

void apply_text(Settings& s, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply(s, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_overrides(Settings& s, const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (!a.starts_with("--") || a.size() < 3) throw UsageError("unexpected argument '" + a + "'");
    std::string key = a.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else {
      if (i + 1 == args.size()) throw UsageError("missing value for --" + key);
      value = args[++i];
    }
    apply(s, key, value);
  }
}

std::string to_text(const Settings& s) {
  std::string out;
  for (const auto& [name, key] : keys()) out += name + " = " + key.get(s) + "\n";
  return out;
}

}  // namespace dagan::cli
