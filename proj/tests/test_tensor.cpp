#include <cstdio>

#include "doctest.h"
#include "odet/tensor.hpp"

using namespace odet;

TEST_CASE("tensor construction validates dims against payload") {
    Tensor t(1, 2, 3, 4);
    CHECK(t.numel() == 24);
    CHECK(t.at(0, 1, 2, 3) == 0.0);
    CHECK_THROWS_AS(Tensor(Dims{1, 0, 2, 2}), ShapeError);
    CHECK_THROWS_AS(Tensor(Dims{1, 1, 2, 2}, std::vector<double>(5, 0.0)), ShapeError);
}

TEST_CASE("row-major layout with batch outermost") {
    Tensor t(2, 3, 2, 2);
    t.at(1, 2, 1, 1) = 7.0;
    CHECK(t.vec().back() == 7.0);
    t.at(0, 0, 0, 1) = 3.0;
    CHECK(t.vec()[1] == 3.0);
}

TEST_CASE("finite validation") {
    Tensor t(1, 1, 1, 2);
    CHECK_NOTHROW(require_finite(t, "ok"));
    t.at(0, 0, 0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(require_finite(t, "nan"), ValidationError);
}

TEST_CASE("golden byte layout of the tensor file format") {
    Tensor t(Dims{1, 1, 1, 2}, {1.0, -2.0});
    const auto bytes = tensor_to_bytes(t);

    // magic, rank u32 LE, four u64 dims LE, then f64 LE payload
    REQUIRE(bytes.size() == 4 + 4 + 4 * 8 + 2 * 8);
    CHECK(bytes[0] == 'T');
    CHECK(bytes[1] == 'N');
    CHECK(bytes[2] == 'S');
    CHECK(bytes[3] == 'R');
    CHECK(bytes[4] == 4);
    CHECK(bytes[5] == 0);
    CHECK(bytes[8] == 1);   // dim0
    CHECK(bytes[32] == 2);  // dim3
    // 1.0 encodes as 0x3FF0000000000000 little-endian
    CHECK(bytes[40 + 7] == 0x3f);
    CHECK(bytes[40 + 6] == 0xf0);
    // -2.0 encodes as 0xC000000000000000
    CHECK(bytes[48 + 7] == 0xc0);

    const Tensor back = tensor_from_bytes(bytes);
    CHECK(back.dims() == t.dims());
    CHECK(back.vec() == t.vec());
}

TEST_CASE("tensor bytes round trip on random content") {
    std::mt19937_64 rng(7);
    Tensor t(2, 3, 4, 5);
    fill_normal(t, rng);
    const Tensor back = tensor_from_bytes(tensor_to_bytes(t));
    CHECK(back.dims() == t.dims());
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(back.vec()[i] == t.vec()[i]);
}

TEST_CASE("tensor files round trip through disk") {
    std::mt19937_64 rng(8);
    Tensor t(1, 2, 3, 3);
    fill_normal(t, rng);
    const std::string path = "odet_golden_tmp.tnsr";
    save_tensor(t, path);
    const Tensor back = load_tensor(path);
    std::remove(path.c_str());
    CHECK(back.dims() == t.dims());
    CHECK(back.vec() == t.vec());
    CHECK_THROWS_AS(load_tensor("does_not_exist.tnsr"), ValidationError);
}

TEST_CASE("malformed tensor bytes are rejected") {
    Tensor t(1, 1, 2, 2);
    auto bytes = tensor_to_bytes(t);
    bytes[0] = 'X';
    CHECK_THROWS_AS(tensor_from_bytes(bytes), ParseError);
    auto truncated = tensor_to_bytes(t);
    truncated.pop_back();
    CHECK_THROWS_AS(tensor_from_bytes(truncated), ParseError);
}
