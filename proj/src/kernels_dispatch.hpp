#pragma once

#include "aquobs/kernels.hpp"

// Internal linkage between the dispatcher and the per-ISA translation units.
// Each returns nullptr when the ISA is not usable on the running CPU.

namespace aquobs::kernels {

#if defined(__x86_64__) || defined(_M_X64)
const Ops* avx2_ops();
#endif

#if defined(__aarch64__) || defined(_M_ARM64)
const Ops* neon_ops();
#endif

}  // namespace aquobs::kernels
