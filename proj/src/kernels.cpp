#include "aquobs/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "kernels_dispatch.hpp"

namespace aquobs::kernels {
namespace {

const Ops* best_simd() {
#if defined(__x86_64__) || defined(_M_X64)
  return avx2_ops();
#elif defined(__aarch64__) || defined(_M_ARM64)
  return neon_ops();
#else
  return nullptr;
#endif
}

const Ops& select() {
  if (const char* env = std::getenv("AQUOBS_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return scalar();
    for (const Ops* ops : available())
      if (std::strcmp(env, ops->name) == 0) return *ops;
    // unknown or unsupported name: fall through to autodetection
  }
  if (const Ops* simd = best_simd()) return *simd;
  return scalar();
}

}  // namespace

const Ops& active() {
  static const Ops& chosen = select();
  return chosen;
}

std::vector<const Ops*> available() {
  std::vector<const Ops*> out{&scalar()};
  if (const Ops* simd = best_simd()) out.push_back(simd);
  return out;
}

}  // namespace aquobs::kernels
