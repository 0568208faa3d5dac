#include "clipagent/simd/iou_kernels.hpp"

#include <algorithm>
#include <atomic>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#endif
#if defined(__aarch64__)
#include <arm_neon.h>
#endif

namespace clipagent::simd {

namespace {

// Same operation order as clipagent::iou.
inline double iou_one(double ps, double pe, double gs, double ge) {
    const double inter = std::max(0.0, std::min(pe, ge) - std::max(ps, gs));
    const double uni = (pe - ps) + (ge - gs) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

bool supported(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

constexpr int kNoOverride = -1;
std::atomic<int> g_override{kNoOverride};

}  // namespace

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

std::optional<Isa> isa_from_string(std::string_view name) {
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
        if (to_string(isa) == name) return isa;
    return std::nullopt;
}

void iou_batch_scalar(const double* ps, const double* pe, const double* gs, const double* ge, double* out,
                      std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = iou_one(ps[i], pe[i], gs[i], ge[i]);
}

#if defined(__x86_64__) || defined(__i386__)
// std::min(a, b) is b < a ? b : a and _mm256_min_pd(b, a) is b < a ? b : a too (max
// likewise), so the operand order below reproduces the scalar code for non-NaN input.
__attribute__((target("avx2"))) void iou_batch_avx2(const double* ps, const double* pe, const double* gs,
                                                     const double* ge, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d a_s = _mm256_loadu_pd(ps + i);
        const __m256d a_e = _mm256_loadu_pd(pe + i);
        const __m256d b_s = _mm256_loadu_pd(gs + i);
        const __m256d b_e = _mm256_loadu_pd(ge + i);
        const __m256d lo_end = _mm256_min_pd(b_e, a_e);
        const __m256d hi_start = _mm256_max_pd(b_s, a_s);
        const __m256d inter = _mm256_max_pd(_mm256_sub_pd(lo_end, hi_start), zero);
        const __m256d uni =
            _mm256_sub_pd(_mm256_add_pd(_mm256_sub_pd(a_e, a_s), _mm256_sub_pd(b_e, b_s)), inter);
        const __m256d positive = _mm256_cmp_pd(uni, zero, _CMP_GT_OQ);
        const __m256d ratio = _mm256_div_pd(inter, _mm256_blendv_pd(_mm256_set1_pd(1.0), uni, positive));
        _mm256_storeu_pd(out + i, _mm256_and_pd(ratio, positive));
    }
    for (; i < n; ++i) out[i] = iou_one(ps[i], pe[i], gs[i], ge[i]);
}
#endif

#if defined(__aarch64__)
void iou_batch_neon(const double* ps, const double* pe, const double* gs, const double* ge, double* out,
                    std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    const float64x2_t one = vdupq_n_f64(1.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t a_s = vld1q_f64(ps + i);
        const float64x2_t a_e = vld1q_f64(pe + i);
        const float64x2_t b_s = vld1q_f64(gs + i);
        const float64x2_t b_e = vld1q_f64(ge + i);
        const float64x2_t inter = vmaxq_f64(vsubq_f64(vminq_f64(a_e, b_e), vmaxq_f64(a_s, b_s)), zero);
        const float64x2_t uni = vsubq_f64(vaddq_f64(vsubq_f64(a_e, a_s), vsubq_f64(b_e, b_s)), inter);
        const uint64x2_t positive = vcgtq_f64(uni, zero);
        const float64x2_t ratio = vdivq_f64(inter, vbslq_f64(positive, uni, one));
        vst1q_f64(out + i, vreinterpretq_f64_u64(vandq_u64(vreinterpretq_u64_f64(ratio), positive)));
    }
    for (; i < n; ++i) out[i] = iou_one(ps[i], pe[i], gs[i], ge[i]);
}
#endif

Isa detect_isa() {
    if (supported(Isa::avx2)) return Isa::avx2;
    if (supported(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

void set_isa_override(std::optional<Isa> isa) {
    g_override.store(isa ? static_cast<int>(*isa) : kNoOverride, std::memory_order_relaxed);
}

Isa active_isa() {
    const int forced = g_override.load(std::memory_order_relaxed);
    if (forced != kNoOverride) {
        const auto isa = static_cast<Isa>(forced);
        return supported(isa) ? isa : Isa::scalar;
    }
    static const Isa detected = detect_isa();
    return detected;
}

void iou_batch(const double* ps, const double* pe, const double* gs, const double* ge, double* out,
               std::size_t n) {
    switch (active_isa()) {
#if defined(__x86_64__) || defined(__i386__)
        case Isa::avx2: iou_batch_avx2(ps, pe, gs, ge, out, n); return;
#endif
#if defined(__aarch64__)
        case Isa::neon: iou_batch_neon(ps, pe, gs, ge, out, n); return;
#endif
        default: iou_batch_scalar(ps, pe, gs, ge, out, n); return;
    }
}

}  // namespace clipagent::simd
