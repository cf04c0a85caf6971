#include "yieldfusion/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace yf::simd {

#ifndef YF_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable* select_default() {
  const char* env = std::getenv("YF_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return &scalar_kernels();
  const KernelTable* v = avx2_kernels();
  if (v != nullptr && cpu_has_avx2()) return v;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{select_default()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

bool set_active_isa(Isa isa) {
  if (isa == Isa::Scalar) {
    active().store(&scalar_kernels(), std::memory_order_release);
    return true;
  }
  const KernelTable* v = avx2_kernels();
  if (v == nullptr || !cpu_has_avx2()) return false;
  active().store(v, std::memory_order_release);
  return true;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace yf::simd
