#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "fm/rng.hpp"

using fm::Rng;

TEST_CASE("same seed reproduces the exact stream") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i)
        CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}

// Pinned stream values. Checkpoint bytes and every seeded sampling decision
// depend on this generator never changing, so any edit to it must be caught.
TEST_CASE("stream is frozen") {
    Rng r(42);
    CHECK(r.next_u64() == 1546998764402558742ULL);
    CHECK(r.next_u64() == 6990951692964543102ULL);
    CHECK(r.next_u64() == 12544586762248559009ULL);
    CHECK(r.next_u64() == 17057574109182124193ULL);

    Rng u(42);
    CHECK(u.uniform() == doctest::Approx(0.083862971059882163).epsilon(1e-15));
    CHECK(u.uniform() == doctest::Approx(0.37898025066266861).epsilon(1e-15));

    Rng n(7);
    CHECK(n.normal() == doctest::Approx(-0.27902399102519809).epsilon(1e-12));
    CHECK(n.normal() == doctest::Approx(1.8997685786889567).epsilon(1e-12));

    CHECK(Rng::mix(42, 3) == 701532786141963250ULL);

    Rng i10(9);
    const std::vector<std::uint64_t> expect = {0, 2, 1, 7, 9, 7, 6, 5};
    for (const std::uint64_t e : expect)
        CHECK(i10.uniform_int(10) == e);
}

TEST_CASE("uniform lies in [0,1) with the right moments") {
    Rng r(5);
    const int n = 200000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.03));
}

TEST_CASE("uniform_int respects the bound and is roughly flat") {
    Rng r(11);
    const std::uint64_t bound = 7;
    std::vector<int> counts(bound, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t v = r.uniform_int(bound);
        REQUIRE(v < bound);
        ++counts[v];
    }
    for (const int c : counts)
        CHECK(std::abs(c - n / 7) < 500);

    Rng one(3);
    for (int i = 0; i < 100; ++i)
        CHECK(one.uniform_int(1) == 0);
}

TEST_CASE("normal has the right moments") {
    Rng r(13);
    const int n = 200000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 0.01);
    CHECK(sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("truncated_normal stays inside two standard deviations") {
    // Variance of a normal truncated to [-2s, 2s]:
    //   s^2 * (1 - 2*2*phi(2) / (2*Phi(2) - 1)) = s^2 * 0.7737
    Rng r(17);
    const double s = 0.02;
    const int n = 100000;
    double sq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.truncated_normal(s);
        CHECK(std::abs(x) <= 2.0 * s);
        sq += x * x;
    }
    const double var = sq / n;
    CHECK(var == doctest::Approx(s * s * 0.7737).epsilon(0.03));
}

TEST_CASE("shuffle permutes and every position is reachable") {
    Rng r(19);
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    r.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i)
        CHECK(sorted[i] == i);

    // Over many seeds, element 0 should land roughly uniformly.
    const int trials = 6000;
    std::vector<int> pos_counts(6, 0);
    for (int t = 0; t < trials; ++t) {
        std::vector<int> w = {0, 1, 2, 3, 4, 5};
        Rng rr(1000 + t);
        rr.shuffle(w);
        for (int i = 0; i < 6; ++i)
            if (w[i] == 0)
                ++pos_counts[i];
    }
    for (const int c : pos_counts)
        CHECK(std::abs(c - trials / 6) < 150);
}

TEST_CASE("mix separates streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 20; ++s)
        for (std::uint64_t stream = 0; stream < 20; ++stream)
            seen.insert(Rng::mix(s, stream));
    CHECK(seen.size() == 400);
    CHECK(Rng::mix(5, 9) == Rng::mix(5, 9));
}
