#include <sstream>
#include <stdexcept>

#include "postgan/generator.hpp"

namespace postgan::gen {
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Ratio parse_ratio(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) return Ratio(std::stoll(s), 1);
  return Ratio(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
}

GeneratorConfig base_preset() {
  GeneratorConfig cfg;
  cfg.scales = {Ratio(1, 1), Ratio(2, 1), Ratio(2, 1), Ratio(2, 1), Ratio(5, 2),
                Ratio(2, 1)};
  return cfg;
}

}  // namespace

GeneratorConfig GeneratorConfig::desk() {
  GeneratorConfig cfg = base_preset();
  cfg.pre_channels = 16;
  cfg.enc_channels = {16, 32, 48, 64, 64, 96};
  cfg.noise_dim = 96;
  cfg.validate();
  return cfg;
}

GeneratorConfig GeneratorConfig::full() {
  GeneratorConfig cfg = base_preset();
  cfg.pre_channels = 112;
  cfg.enc_channels = {112, 112, 112, 96, 96, 96};
  cfg.noise_dim = 96;
  cfg.validate();
  return cfg;
}

GeneratorConfig GeneratorConfig::tiny() {
  GeneratorConfig cfg = base_preset();
  cfg.pre_channels = 4;
  cfg.enc_channels = {4, 6, 6, 8, 8, 8};
  cfg.noise_dim = 8;
  cfg.validate();
  return cfg;
}

dsp::MelConfig GeneratorConfig::mel() const {
  dsp::MelConfig m;
  m.sample_rate = sample_rate;
  m.num_mels = mel_bins;
  return m;
}

std::vector<int64_t> GeneratorConfig::enc_in_channels() const {
  std::vector<int64_t> in;
  int64_t prev = pre_channels;
  for (const int64_t c : enc_channels) {
    in.push_back(prev);
    prev = c;
  }
  return in;
}

int64_t GeneratorConfig::bottleneck_channels() const {
  return enc_channels.empty() ? pre_channels : enc_channels.back();
}

std::vector<int64_t> GeneratorConfig::cond_factors() const {
  // factor_i * (cumulative downsampling before block i) = hop / num_bands.
  const int64_t base = frame_samples() / num_bands;
  std::vector<int64_t> factors;
  int64_t cum_num = 1, cum_den = 1;
  for (const Ratio& s : scales) {
    const int64_t num = base * cum_den;
    if (num % cum_num != 0)
      throw std::invalid_argument("GeneratorConfig: non-integer CondNet factor");
    factors.push_back(num / cum_num);
    cum_num *= s.num;
    cum_den *= s.den;
    const int64_t g = std::gcd(cum_num, cum_den);
    cum_num /= g;
    cum_den /= g;
  }
  return factors;
}

void GeneratorConfig::validate() const {
  if (sample_rate <= 0 || num_bands < 1 || mel_bins < 1)
    throw std::invalid_argument("GeneratorConfig: bad rates/bands");
  if (num_blocks < 0 || enc_channels.size() != static_cast<size_t>(num_blocks) ||
      scales.size() != static_cast<size_t>(num_blocks))
    throw std::invalid_argument("GeneratorConfig: block count mismatch");
  if (pre_channels < 1 || tade_units < 1 || pre_kernel < 1 || post_kernel < 1 ||
      inner_kernel < 1)
    throw std::invalid_argument("GeneratorConfig: bad widths/kernels");
  for (const int64_t c : enc_channels)
    if (c < 1) throw std::invalid_argument("GeneratorConfig: bad channel width");
  if (frame_samples() % num_bands != 0)
    throw std::invalid_argument("GeneratorConfig: hop not divisible by bands");
  if (num_blocks > 0) {
    // Encoder scales x bands must reach the mel frame rate exactly:
    // prod(scales) * num_bands = hop (40 * 4 = 160 by default).
    int64_t num = 1, den = 1;
    for (const Ratio& s : scales) {
      num *= s.num;
      den *= s.den;
      const int64_t g = std::gcd(num, den);
      num /= g;
      den /= g;
    }
    if (den != 1 || num * num_bands != frame_samples())
      throw std::invalid_argument(
          "GeneratorConfig: scales * bands must equal samples per frame");
    cond_factors();  // throws when any per-block factor is fractional
    if (noise_dim != bottleneck_channels())
      throw std::invalid_argument(
          "GeneratorConfig: noise_dim must match bottleneck width");
  }
}

std::string GeneratorConfig::to_text() const {
  std::ostringstream os;
  os << "sample_rate=" << sample_rate << "\n";
  os << "num_bands=" << num_bands << "\n";
  os << "pqmf_taps=" << pqmf_taps << "\n";
  os << "pqmf_beta=" << pqmf_beta << "\n";
  os << "pqmf_cutoff=" << pqmf_cutoff << "\n";
  os << "mel_bins=" << mel_bins << "\n";
  os << "num_blocks=" << num_blocks << "\n";
  os << "pre_channels=" << pre_channels << "\n";
  os << "enc_channels=";
  for (size_t i = 0; i < enc_channels.size(); ++i)
    os << (i ? "," : "") << enc_channels[i];
  os << "\n";
  os << "scales=";
  for (size_t i = 0; i < scales.size(); ++i) os << (i ? "," : "") << scales[i].str();
  os << "\n";
  os << "tade_units=" << tade_units << "\n";
  os << "noise_dim=" << noise_dim << "\n";
  os << "pre_kernel=" << pre_kernel << "\n";
  os << "post_kernel=" << post_kernel << "\n";
  os << "inner_kernel=" << inner_kernel << "\n";
  return os.str();
}

GeneratorConfig GeneratorConfig::from_text(const std::string& text) {
  GeneratorConfig cfg;
  cfg.enc_channels.clear();
  cfg.scales.clear();
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("GeneratorConfig: bad config line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "sample_rate") {
      cfg.sample_rate = std::stoi(value);
    } else if (key == "num_bands") {
      cfg.num_bands = std::stoi(value);
    } else if (key == "pqmf_taps") {
      cfg.pqmf_taps = std::stoi(value);
    } else if (key == "pqmf_beta") {
      cfg.pqmf_beta = std::stod(value);
    } else if (key == "pqmf_cutoff") {
      cfg.pqmf_cutoff = std::stod(value);
    } else if (key == "mel_bins") {
      cfg.mel_bins = std::stoi(value);
    } else if (key == "num_blocks") {
      cfg.num_blocks = std::stoi(value);
    } else if (key == "pre_channels") {
      cfg.pre_channels = std::stoll(value);
    } else if (key == "enc_channels") {
      for (const auto& tok : split(value, ',')) cfg.enc_channels.push_back(std::stoll(tok));
    } else if (key == "scales") {
      for (const auto& tok : split(value, ',')) cfg.scales.push_back(parse_ratio(tok));
    } else if (key == "tade_units") {
      cfg.tade_units = std::stoi(value);
    } else if (key == "noise_dim") {
      cfg.noise_dim = std::stoll(value);
    } else if (key == "pre_kernel") {
      cfg.pre_kernel = std::stoi(value);
    } else if (key == "post_kernel") {
      cfg.post_kernel = std::stoi(value);
    } else if (key == "inner_kernel") {
      cfg.inner_kernel = std::stoi(value);
    } else {
      throw std::invalid_argument("GeneratorConfig: unknown config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace postgan::gen
