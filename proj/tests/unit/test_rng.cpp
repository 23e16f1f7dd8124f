#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "trap/rng.hpp"

TEST_SUITE("rng") {

TEST_CASE("same seed, same stream") {
  trap::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("derived seeds differ across streams and indices") {
  std::set<std::uint64_t> seen;
  for (auto s : {trap::Stream::kSplit, trap::Stream::kAttack, trap::Stream::kVictimTrain})
    for (std::uint64_t i = 0; i < 10; ++i) seen.insert(trap::derive_seed(7, s, i));
  CHECK(seen.size() == 30);
  CHECK(trap::derive_seed(7, trap::Stream::kSplit) == trap::derive_seed(7, trap::Stream::kSplit));
  CHECK(trap::derive_seed(7, trap::Stream::kSplit) != trap::derive_seed(8, trap::Stream::kSplit));
}

TEST_CASE("uniform and below stay in range") {
  trap::Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(7) < 7);
  }
}

TEST_CASE("normal has roughly zero mean and unit variance") {
  trap::Rng r(3);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation") {
  trap::Rng r(9);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  r.shuffle<int>(v);
  std::set<int> s(v.begin(), v.end());
  CHECK(s.size() == 8);
}

}
