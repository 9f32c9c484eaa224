#include <doctest.h>

#include <stdexcept>

#include "cardiolabel/tensor.hpp"

using cardiolabel::Tensor;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("shape constructor zero-fills") {
  Tensor t({2, 3});
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  for (std::int64_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);
}

TEST_CASE("row-major multi-index layout") {
  Tensor t({2, 3, 4});
  t.at({1, 2, 3}) = 7.0;
  CHECK(t[1 * 12 + 2 * 4 + 3] == 7.0);
  t.at({0, 1, 0}) = -2.0;
  CHECK(t[4] == -2.0);
}

TEST_CASE("value constructor checks element count") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::runtime_error);
  Tensor ok({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(ok.at({1, 0}) == 3.0);
}

TEST_CASE("scalar tensor is rank 0 with one element") {
  Tensor s = Tensor::scalar(2.5);
  CHECK(s.rank() == 0);
  CHECK(s.size() == 1);
  CHECK(s.item() == 2.5);
}

TEST_CASE("out of range index throws") {
  Tensor t({2, 2});
  CHECK_THROWS_AS(t.at({2, 0}), std::runtime_error);
  CHECK_THROWS_AS(t.at({0, 0, 0}), std::runtime_error);
  CHECK_THROWS_AS(t.dim(2), std::runtime_error);
}

TEST_CASE("item requires a single element") {
  Tensor t({3});
  CHECK_THROWS_AS(t.item(), std::runtime_error);
}

TEST_SUITE_END();
