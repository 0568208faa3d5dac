#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace clipagent::simd {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);
std::optional<Isa> isa_from_string(std::string_view name);

// Element-wise IoU of [ps[i], pe[i]] against [gs[i], ge[i]].
//
// Inputs must be sanitized: finite, start <= end. Every variant produces results
// bit-identical to clipagent::iou on sanitized inputs.
void iou_batch_scalar(const double* ps, const double* pe, const double* gs, const double* ge, double* out,
                      std::size_t n);
#if defined(__x86_64__) || defined(__i386__)
void iou_batch_avx2(const double* ps, const double* pe, const double* gs, const double* ge, double* out,
                    std::size_t n);
#endif
#if defined(__aarch64__)
void iou_batch_neon(const double* ps, const double* pe, const double* gs, const double* ge, double* out,
                    std::size_t n);
#endif

// Best variant the running CPU supports.
Isa detect_isa();

// Forces a variant (nullopt restores detection). Forcing an unsupported variant falls back to scalar.
void set_isa_override(std::optional<Isa> isa);
Isa active_isa();

// Dispatches to active_isa().
void iou_batch(const double* ps, const double* pe, const double* gs, const double* ge, double* out, std::size_t n);

}  // namespace clipagent::simd
