#include <cstdlib>
#include <string_view>

#include "gmrt/simd.hpp"

namespace gmrt::simd {

const KernelTable& kernels() {
  static const KernelTable& selected = []() -> const KernelTable& {
    const char* env = std::getenv("GMRT_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
  }();
  return selected;
}

}  // namespace gmrt::simd
