#include "wavemo/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace wavemo::fft {
namespace {

// FFTW planning is not thread-safe, execution of an existing plan on new
// arrays is. Plans are created once per (n, direction) under a lock and kept
// for the process lifetime.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch(static_cast<std::size_t>(n) * n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(n, n, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

void execute(std::span<Complex> data, int n, int sign) {
  if (data.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("fft: buffer size does not match n*n");
  }
  fftw_plan plan = PlanCache::instance().get(n, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
}

}  // namespace

void forward(std::span<Complex> data, int n) { execute(data, n, FFTW_FORWARD); }

void inverse(std::span<Complex> data, int n) {
  execute(data, n, FFTW_BACKWARD);
  const double scale = 1.0 / (static_cast<double>(n) * n);
  for (auto& v : data) v *= scale;
}

std::vector<Complex> forward_real(std::span<const double> data, int n) {
  std::vector<Complex> out(data.begin(), data.end());
  forward(out, n);
  return out;
}

std::vector<double> inverse_real(std::span<const Complex> data, int n) {
  std::vector<Complex> tmp(data.begin(), data.end());
  inverse(tmp, n);
  std::vector<double> out(tmp.size());
  for (std::size_t i = 0; i < tmp.size(); ++i) out[i] = tmp[i].real();
  return out;
}

}  // namespace wavemo::fft
