#include "retts/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "retts/error.hpp"

namespace retts {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_integer(const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw InputError("not an integer: '" + text + "'");
  return value;
}

double parse_double(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw InputError("not a number: '" + text + "'");
    return v;
  } catch (const std::logic_error&) {
    throw InputError("not a number: '" + text + "'");
  }
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Member>
Field size_field(std::string key, Member member) {
  return {key, [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& v) { member(c) = parse_integer<std::size_t>(v); }};
}

template <typename Member>
Field u64_field(std::string key, Member member) {
  return {key, [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& v) { member(c) = parse_integer<std::uint64_t>(v); }};
}

template <typename Member>
Field double_field(std::string key, Member member) {
  return {key, [member](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& v) { member(c) = parse_double(v); }};
}

#define RETTS_M(field) [](RunConfig& c) -> auto& { return c.model.field; }
#define RETTS_T(field) [](RunConfig& c) -> auto& { return c.train.field; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(size_field("tokens", RETTS_M(tokens)));
    f.push_back(size_field("encoder_layers", RETTS_M(encoder_layers)));
    f.push_back(size_field("decoder_layers", RETTS_M(decoder_layers)));
    f.push_back(size_field("gfe_layers", RETTS_M(gfe_layers)));
    f.push_back(size_field("d_model", RETTS_M(d_model)));
    f.push_back(size_field("ffn_hidden", RETTS_M(ffn_hidden)));
    f.push_back(size_field("gfe_channels", RETTS_M(gfe_channels)));
    f.push_back(size_field("gfe_ffn_hidden", RETTS_M(gfe_ffn_hidden)));
    f.push_back(size_field("n_heads", RETTS_M(n_heads)));
    f.push_back(size_field("n_mels", RETTS_M(n_mels)));
    f.push_back(size_field("phoneme_vocab", RETTS_M(phoneme_vocab)));
    f.push_back(size_field("max_duration", RETTS_M(max_duration)));
    f.push_back(size_field("feature_dim", RETTS_M(feature_dim)));
    f.push_back(size_field("predictor_channels", RETTS_M(predictor_channels)));
    f.push_back(double_field("predictor_dropout", RETTS_M(predictor_dropout)));
    f.push_back(size_field("align_dim", RETTS_M(align_dim)));

    f.push_back(size_field("batch_size", RETTS_T(batch_size)));
    f.push_back(double_field("weight_decay", RETTS_T(weight_decay)));
    f.push_back(double_field("beta1", RETTS_T(beta1)));
    f.push_back(double_field("beta2", RETTS_T(beta2)));
    f.push_back(double_field("lamb_eps", RETTS_T(lamb_eps)));
    f.push_back(double_field("trust_clip", RETTS_T(trust_clip)));
    f.push_back(double_field("grad_clip", RETTS_T(grad_clip)));
    f.push_back(double_field("stage1_lr", RETTS_T(stage1_lr)));
    f.push_back(double_field("stage1_power", RETTS_T(stage1_power)));
    f.push_back(u64_field("stage1_warmup", RETTS_T(stage1_warmup)));
    f.push_back(u64_field("stage1_total", RETTS_T(stage1_total)));
    f.push_back(double_field("stage2_lr_model", RETTS_T(stage2_lr_model)));
    f.push_back(double_field("stage2_lr_disc", RETTS_T(stage2_lr_disc)));
    f.push_back(u64_field("stage2_steps", RETTS_T(stage2_steps)));
    f.push_back(double_field("alpha_duration", RETTS_T(alpha_duration)));
    f.push_back(double_field("alpha_pitch", RETTS_T(alpha_pitch)));
    f.push_back(double_field("alpha_energy", RETTS_T(alpha_energy)));
    f.push_back(double_field("alpha_align", RETTS_T(alpha_align)));
    f.push_back(double_field("lambda_feat", RETTS_T(lambda_feat)));
    f.push_back(double_field("mask_probability", RETTS_T(mask_probability)));
    f.push_back(size_field("mask_span_min", RETTS_T(mask_span_min)));
    f.push_back(size_field("mask_span_max", RETTS_T(mask_span_max)));
    f.push_back(size_field("disc_chunk", RETTS_T(disc_chunk)));
    f.push_back({"disc_channels",
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.train.disc_channels.size(); ++i) {
                     if (i) out += ',';
                     out += std::to_string(c.train.disc_channels[i]);
                   }
                   return out;
                 },
                 [](RunConfig& c, const std::string& v) {
                   std::vector<std::size_t> channels;
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ',')) channels.push_back(parse_integer<std::size_t>(trim(item)));
                   if (channels.empty()) throw InputError("disc_channels needs at least one entry");
                   c.train.disc_channels = std::move(channels);
                 }});
    f.push_back(size_field("disc_kernel", RETTS_T(disc_kernel)));
    f.push_back(size_field("disc_stride", RETTS_T(disc_stride)));
    f.push_back(double_field("disc_slope", RETTS_T(disc_slope)));
    f.push_back({"duration_source", [](const RunConfig& c) { return to_string(c.train.duration_source); },
                 [](RunConfig& c, const std::string& v) { c.train.duration_source = duration_source_from_string(v); }});
    f.push_back(u64_field("checkpoint_every", RETTS_T(checkpoint_every)));
    return f;
  }();
  return table;
}

#undef RETTS_M
#undef RETTS_T

}  // namespace

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    bool found = false;
    for (const Field& f : fields()) {
      if (f.key != key) continue;
      try {
        f.set(base, value);
      } catch (const InputError& e) {
        throw InputError("config line " + std::to_string(line_no) + " (" + key + "): " + e.what());
      }
      found = true;
      break;
    }
    if (!found) throw InputError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += f.key + "=" + f.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace retts
