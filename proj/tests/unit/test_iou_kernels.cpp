#include <doctest.h>

#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "clipagent/rewards.hpp"
#include "clipagent/simd/iou_kernels.hpp"

using namespace clipagent;
using namespace clipagent::simd;

namespace {

struct Batch {
    std::vector<double> ps, pe, gs, ge;
    void add(double a, double b, double c, double d) {
        ps.push_back(a);
        pe.push_back(b);
        gs.push_back(c);
        ge.push_back(d);
    }
    std::size_t size() const { return ps.size(); }
};

Batch make_batch(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 500.0);
    Batch b;
    const double tiny = std::numeric_limits<double>::denorm_min();
    b.add(0, 0, 0, 0);
    b.add(3, 3, 3, 3);
    b.add(0, 10, 10, 20);
    b.add(0, 10, 0, 10);
    b.add(0, tiny, 0, tiny);
    b.add(-0.0, 0.0, 0.0, 1.0);
    b.add(1e300, 1e300, 0, 1);
    while (b.size() < n) {
        double p0 = u(rng), p1 = u(rng), g0 = u(rng), g1 = u(rng);
        if (p0 > p1) std::swap(p0, p1);
        if (g0 > g1) std::swap(g0, g1);
        b.add(p0, p1, g0, g1);
    }
    return b;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scalar kernel matches the reward IoU") {
    const auto b = make_batch(1, 1003);
    std::vector<double> out(b.size());
    iou_batch_scalar(b.ps.data(), b.pe.data(), b.gs.data(), b.ge.data(), out.data(), b.size());
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(out[i] == iou({b.ps[i], b.pe[i]}, {b.gs[i], b.ge[i]}));
}

#if defined(__x86_64__) || defined(__i386__)
TEST_CASE("AVX2 kernel is bit-identical to scalar") {
    if (detect_isa() != Isa::avx2) return;
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 1001u}) {
        const auto b = make_batch(n + 10, n);
        std::vector<double> s(b.size()), v(b.size());
        iou_batch_scalar(b.ps.data(), b.pe.data(), b.gs.data(), b.ge.data(), s.data(), b.size());
        iou_batch_avx2(b.ps.data(), b.pe.data(), b.gs.data(), b.ge.data(), v.data(), b.size());
        CHECK(bit_equal(s, v));
    }
}
#endif

TEST_CASE("dispatch and override") {
    const auto b = make_batch(5, 257);
    std::vector<double> ref(b.size()), got(b.size());
    iou_batch_scalar(b.ps.data(), b.pe.data(), b.gs.data(), b.ge.data(), ref.data(), b.size());

    CHECK(active_isa() == detect_isa());
    iou_batch(b.ps.data(), b.pe.data(), b.gs.data(), b.ge.data(), got.data(), b.size());
    CHECK(bit_equal(ref, got));

    set_isa_override(Isa::scalar);
    CHECK(active_isa() == Isa::scalar);
    iou_batch(b.ps.data(), b.pe.data(), b.gs.data(), b.ge.data(), got.data(), b.size());
    CHECK(bit_equal(ref, got));

#if defined(__x86_64__) || defined(__i386__)
    set_isa_override(Isa::neon);
    CHECK(active_isa() == Isa::scalar);
#endif
    set_isa_override(std::nullopt);
    CHECK(active_isa() == detect_isa());

    CHECK(isa_from_string("avx2") == Isa::avx2);
    CHECK(to_string(Isa::neon) == "neon");
    CHECK_FALSE(isa_from_string("sse9"));
}
