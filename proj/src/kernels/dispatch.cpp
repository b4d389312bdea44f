#include "somnus/kernels.hpp"

#include <cstdlib>

namespace somnus::kern {
namespace {

bool cpu_has_avx2() {
#if defined(SOMNUS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops* pick_auto() {
#if defined(SOMNUS_HAVE_AVX2)
  if (cpu_has_avx2()) return &avx2_ops();
#endif
#if defined(SOMNUS_HAVE_NEON)
  return &neon_ops();
#endif
  return &scalar_ops();
}

const Ops* lookup(const std::string& name) {
  if (name == "scalar") return &scalar_ops();
  if (name == "auto") return pick_auto();
#if defined(SOMNUS_HAVE_AVX2)
  if (name == "avx2" && cpu_has_avx2()) return &avx2_ops();
#endif
#if defined(SOMNUS_HAVE_NEON)
  if (name == "neon") return &neon_ops();
#endif
  return nullptr;
}

const Ops* initial_pick() {
  if (const char* env = std::getenv("SOMNUS_KERNELS")) {
    if (const Ops* ops = lookup(env)) return ops;
    // Unknown or unsupported request: fall through to auto rather than abort.
  }
  return pick_auto();
}

const Ops*& active_slot() {
  static const Ops* active = initial_pick();
  return active;
}

}  // namespace

const Ops& active() { return *active_slot(); }

std::string backend_name() { return active().name; }

bool set_backend(const std::string& name) {
  const Ops* ops = lookup(name);
  if (!ops) return false;
  active_slot() = ops;
  return true;
}

std::vector<std::string> available_backends() {
  std::vector<std::string> names = {"scalar"};
#if defined(SOMNUS_HAVE_AVX2)
  if (cpu_has_avx2()) names.emplace_back("avx2");
#endif
#if defined(SOMNUS_HAVE_NEON)
  names.emplace_back("neon");
#endif
  return names;
}

}  // namespace somnus::kern
