#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wavemo/diversity.hpp"
#include "wavemo/field.hpp"
#include "wavemo/recon_proxy.hpp"

namespace wavemo::io {

namespace fs = std::filesystem;

/// Little-endian single-channel PFM ("Pf", scale -1.0). Rows are stored
/// bottom-to-top as the format requires.
void write_pfm(const fs::path& path, std::span<const double> values, int n);
std::vector<double> read_pfm(const fs::path& path, int* n_out = nullptr);

template <typename Tag>
void write_pfm(const fs::path& path, const Plane<Tag>& plane) {
  write_pfm(path, plane.values(), plane.n());
}
Image read_image_pfm(const fs::path& path, const GridSpec& grid);

/// 8-bit binary PGM (P5), values clipped to [0, 1] and rounded.
void write_pgm(const fs::path& path, std::span<const double> values, int n);
std::vector<double> read_pgm(const fs::path& path, int* n_out = nullptr);

/// Loads .pfm or .pgm by extension.
Image read_image(const fs::path& path, const GridSpec& grid);

/// Plain key=value text; `#` starts a comment, blank lines are skipped.
using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(const fs::path& path);
void write_key_values(const fs::path& path, const KeyValues& kv);

/// RFC-4180 CSV with a header row; numbers printed with full precision.
void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void write_csv_text(const fs::path& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);
std::vector<std::vector<double>> read_csv_numbers(const fs::path& path,
                                                  std::vector<std::string>* header = nullptr);

/// K x modes coefficient CSV with header z1..zM.
void write_coeffs_csv(const fs::path& path, const std::vector<std::vector<double>>& coeffs);
std::vector<std::vector<double>> read_coeffs_csv(const fs::path& path);

/// Stable 64-bit FNV-1a over the coefficient text, used to tie stacks to
/// modulation files.
std::string coeffs_hash(const std::vector<std::vector<double>>& coeffs);

/// Stack directory: frame_000.pfm ..., modulation_000.pfm ..., optional
/// scene.pfm and aberration.csv, plus manifest.txt.
void write_stack(const fs::path& dir, const MeasurementStack& stack, const KeyValues& extra);
MeasurementStack read_stack(const fs::path& dir, KeyValues* manifest = nullptr);

/// Proxy bundle: w_XXX_re.pfm / w_XXX_im.pfm per frame, reg_pre.pfm and manifest.txt.
void write_proxy(const fs::path& dir, const ProxyParams& params);
ProxyParams read_proxy(const fs::path& dir);

/// Creates the directory (and parents) or throws IoError.
void ensure_dir(const fs::path& dir);

}  // namespace wavemo::io
