#include "wavemo/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace wavemo::io {
namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Reads the next whitespace-delimited header token of a PNM-style file.
std::string header_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok += c;
  }
  return tok;
}

std::string frame_name(const char* prefix, int i) {
  std::ostringstream os;
  os << prefix << std::setw(3) << std::setfill('0') << i << ".pfm";
  return os.str();
}

int parse_int(const KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw IoError("manifest is missing '" + key + "'");
  return std::stoi(it->second);
}

}  // namespace

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory '" + dir.string() + "'");
  }
}

void write_pfm(const fs::path& path, std::span<const double> values, int n) {
  if (values.size() != static_cast<std::size_t>(n) * n) throw std::invalid_argument("write_pfm: size mismatch");
  auto out = open_out(path, std::ios::binary);
  out << "Pf\n" << n << " " << n << "\n-1.0\n";
  for (int r = n - 1; r >= 0; --r) {
    for (int c = 0; c < n; ++c) {
      const float f = static_cast<float>(values[static_cast<std::size_t>(r) * n + c]);
      auto bits = std::bit_cast<std::uint32_t>(f);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<double> read_pfm(const fs::path& path, int* n_out) {
  auto in = open_in(path, std::ios::binary);
  if (header_token(in) != "Pf") throw IoError("'" + path.string() + "' is not a grayscale PFM");
  const int w = std::stoi(header_token(in));
  const int h = std::stoi(header_token(in));
  const double scale = std::stod(header_token(in));
  if (w != h) throw IoError("'" + path.string() + "' is not square");
  const bool little = scale < 0.0;
  std::vector<double> values(static_cast<std::size_t>(w) * h);
  for (int r = h - 1; r >= 0; --r) {
    for (int c = 0; c < w; ++c) {
      std::uint32_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw IoError("truncated PFM '" + path.string() + "'");
      if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
      values[static_cast<std::size_t>(r) * w + c] = std::bit_cast<float>(bits);
    }
  }
  if (n_out) *n_out = w;
  return values;
}

Image read_image_pfm(const fs::path& path, const GridSpec& grid) {
  int n = 0;
  auto v = read_pfm(path, &n);
  if (n != grid.n) throw IoError("'" + path.string() + "' has size " + std::to_string(n) + ", expected " + std::to_string(grid.n));
  return Image(grid, std::move(v));
}

void write_pgm(const fs::path& path, std::span<const double> values, int n) {
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << n << " " << n << "\n255\n";
  for (double v : values) {
    const auto byte = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    out.put(static_cast<char>(byte));
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<double> read_pgm(const fs::path& path, int* n_out) {
  auto in = open_in(path, std::ios::binary);
  if (header_token(in) != "P5") throw IoError("'" + path.string() + "' is not a binary PGM");
  const int w = std::stoi(header_token(in));
  const int h = std::stoi(header_token(in));
  const int maxval = std::stoi(header_token(in));
  if (w != h) throw IoError("'" + path.string() + "' is not square");
  if (maxval <= 0 || maxval > 255) throw IoError("only 8-bit PGM is supported");
  std::vector<double> values(static_cast<std::size_t>(w) * h);
  for (auto& v : values) {
    char c;
    if (!in.get(c)) throw IoError("truncated PGM '" + path.string() + "'");
    v = static_cast<unsigned char>(c) / static_cast<double>(maxval);
  }
  if (n_out) *n_out = w;
  return values;
}

Image read_image(const fs::path& path, const GridSpec& grid) {
  const auto ext = path.extension().string();
  if (ext == ".pfm") return read_image_pfm(path, grid);
  if (ext == ".pgm") {
    int n = 0;
    auto v = read_pgm(path, &n);
    if (n != grid.n) throw IoError("'" + path.string() + "' does not match the grid size");
    return Image(grid, std::move(v));
  }
  throw IoError("unsupported image format '" + ext + "'");
}

KeyValues read_key_values(const fs::path& path) {
  auto in = open_in(path);
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_key_values(const fs::path& path, const KeyValues& kv) {
  auto out = open_out(path);
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_csv_text(const fs::path& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
  auto out = open_out(path);
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(row[i]);
    out << "\r\n";
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<std::string>> text;
  text.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<std::string> t;
    for (double v : r) t.push_back(format_double(v));
    text.push_back(std::move(t));
  }
  write_csv_text(path, header, text);
}

std::vector<std::vector<double>> read_csv_numbers(const fs::path& path,
                                                  std::vector<std::string>* header) {
  auto in = open_in(path);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (first) {
      first = false;
      if (header) *header = fields;
      continue;
    }
    std::vector<double> row;
    for (const auto& v : fields) {
      try {
        row.push_back(std::stod(v));
      } catch (const std::exception&) {
        throw IoError("non-numeric CSV field '" + v + "' in '" + path.string() + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_coeffs_csv(const fs::path& path, const std::vector<std::vector<double>>& coeffs) {
  const std::size_t modes = coeffs.empty() ? kDefaultZernikeModes : coeffs.front().size();
  std::vector<std::string> header;
  for (std::size_t j = 1; j <= modes; ++j) header.push_back("z" + std::to_string(j));
  write_csv(path, header, coeffs);
}

std::vector<std::vector<double>> read_coeffs_csv(const fs::path& path) {
  std::vector<std::string> header;
  auto rows = read_csv_numbers(path, &header);
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw IoError("ragged coefficient CSV '" + path.string() + "'");
  }
  return rows;
}

std::string coeffs_hash(const std::vector<std::vector<double>>& coeffs) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& row : coeffs) {
    for (double v : row) {
      for (char c : format_double(v) + ",") {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
      }
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_stack(const fs::path& dir, const MeasurementStack& stack, const KeyValues& extra) {
  ensure_dir(dir);
  KeyValues kv = extra;
  kv["K"] = std::to_string(stack.k());
  kv["n"] = std::to_string(stack.grid().n);
  kv["aperture_radius_frac"] = format_double(stack.grid().aperture_radius_frac);
  kv["sigma"] = format_double(stack.noise_sigma);
  kv["provenance"] = std::string(to_string(stack.modulations.provenance));
  if (stack.modulations.coeffs) kv["modulation_hash"] = coeffs_hash(*stack.modulations.coeffs);
  for (int i = 0; i < stack.k(); ++i) {
    write_pfm(dir / frame_name("frame_", i), stack.frames[i]);
    write_pfm(dir / frame_name("modulation_", i), stack.modulations.patterns[i]);
  }
  if (stack.modulations.coeffs) write_coeffs_csv(dir / "modulations.csv", *stack.modulations.coeffs);
  if (stack.scene_truth) write_pfm(dir / "scene.pfm", *stack.scene_truth);
  if (stack.aberration_truth) {
    write_coeffs_csv(dir / "aberration.csv", {stack.aberration_truth->coeffs});
    kv["has_truth"] = "1";
  }
  write_key_values(dir / "manifest.txt", kv);
}

MeasurementStack read_stack(const fs::path& dir, KeyValues* manifest) {
  const auto kv = read_key_values(dir / "manifest.txt");
  const int k = parse_int(kv, "K");
  GridSpec grid{parse_int(kv, "n"), std::stod(kv.at("aperture_radius_frac"))};
  grid.validate();
  MeasurementStack stack;
  stack.noise_sigma = std::stod(kv.at("sigma"));
  stack.modulations.provenance = provenance_from_string(kv.at("provenance"));
  for (int i = 0; i < k; ++i) {
    stack.frames.push_back(read_image_pfm(dir / frame_name("frame_", i), grid));
    stack.modulations.patterns.push_back(read_image_pfm(dir / frame_name("modulation_", i), grid).retag<PhaseTag>());
  }
  if (fs::exists(dir / "modulations.csv")) stack.modulations.coeffs = read_coeffs_csv(dir / "modulations.csv");
  if (fs::exists(dir / "scene.pfm")) stack.scene_truth = read_image_pfm(dir / "scene.pfm", grid);
  if (fs::exists(dir / "aberration.csv")) {
    AberrationSample s;
    s.coeffs = read_coeffs_csv(dir / "aberration.csv").at(0);
    s.sigmas.assign(s.coeffs.size(), 0.0);
    stack.aberration_truth = std::move(s);
  }
  if (manifest) *manifest = kv;
  return stack;
}

void write_proxy(const fs::path& dir, const ProxyParams& params) {
  ensure_dir(dir);
  const int n = params.grid.n;
  std::vector<double> re(params.grid.pixels()), im(params.grid.pixels());
  for (int i = 0; i < params.k(); ++i) {
    for (std::size_t p = 0; p < re.size(); ++p) {
      re[p] = params.weights[i][p].real();
      im[p] = params.weights[i][p].imag();
    }
    std::ostringstream base;
    base << "w_" << std::setw(3) << std::setfill('0') << i;
    write_pfm(dir / (base.str() + "_re.pfm"), re, n);
    write_pfm(dir / (base.str() + "_im.pfm"), im, n);
  }
  write_pfm(dir / "reg_pre.pfm", params.reg_pre, n);
  write_key_values(dir / "manifest.txt", {{"K", std::to_string(params.k())},
                                          {"n", std::to_string(n)},
                                          {"aperture_radius_frac", format_double(params.grid.aperture_radius_frac)},
                                          {"bias", format_double(params.bias)}});
}

ProxyParams read_proxy(const fs::path& dir) {
  const auto kv = read_key_values(dir / "manifest.txt");
  GridSpec grid{parse_int(kv, "n"), std::stod(kv.at("aperture_radius_frac"))};
  auto params = ProxyParams::zeros(grid, parse_int(kv, "K"));
  params.bias = std::stod(kv.at("bias"));
  for (int i = 0; i < params.k(); ++i) {
    std::ostringstream base;
    base << "w_" << std::setw(3) << std::setfill('0') << i;
    const auto re = read_pfm(dir / (base.str() + "_re.pfm"));
    const auto im = read_pfm(dir / (base.str() + "_im.pfm"));
    for (std::size_t p = 0; p < re.size(); ++p) params.weights[i][p] = {re[p], im[p]};
  }
  params.reg_pre = read_pfm(dir / "reg_pre.pfm");
  return params;
}

}  // namespace wavemo::io
