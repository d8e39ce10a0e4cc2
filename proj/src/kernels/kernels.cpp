#include "ccr/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "ccr/common.hpp"

namespace ccr::kernels {

const Kernels* avx2_table();  // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* pick_default() {
  if (const char* env = std::getenv("CCR_KERNELS")) {
    const std::string which(env);
    if (which == "scalar") return &scalar();
    if (which == "avx2") {
      const Kernels* t = avx2();
      if (!t) throw ConfigError("CCR_KERNELS=avx2 but this CPU/build has no AVX2 kernels");
      return t;
    }
    if (!which.empty() && which != "auto") {
      throw ConfigError("unknown CCR_KERNELS value: " + which);
    }
  }
  if (const Kernels* t = avx2()) return t;
  return &scalar();
}

std::atomic<const Kernels*>& slot() {
  static std::atomic<const Kernels*> current{nullptr};
  return current;
}

}  // namespace

const Kernels* avx2() { return cpu_has_avx2() ? avx2_table() : nullptr; }

const Kernels& active() {
  const Kernels* t = slot().load(std::memory_order_acquire);
  if (!t) {
    t = pick_default();
    slot().store(t, std::memory_order_release);
  }
  return *t;
}

void force(const std::string& which) {
  if (which == "auto") {
    slot().store(pick_default(), std::memory_order_release);
    return;
  }
  if (which == "scalar") {
    slot().store(&scalar(), std::memory_order_release);
    return;
  }
  if (which == "avx2") {
    const Kernels* t = avx2();
    if (!t) throw ConfigError("AVX2 kernels unavailable on this CPU/build");
    slot().store(t, std::memory_order_release);
    return;
  }
  throw ConfigError("unknown kernel table: " + which);
}

}  // namespace ccr::kernels
