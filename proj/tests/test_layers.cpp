// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "p2t/model/layers.hpp"
#include "toy.hpp"

using namespace p2t;
using namespace p2t::model;

namespace {

// Largest |sparse - dense| over the sparse output sites.
double max_gap_at_sites(const SparseMap& s, const DenseMap& d) {
    double gap = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto dense = d.at(flat_index(d.dims, s.sites[i]));
        const auto row = s.row(i);
        for (int c = 0; c < s.channels; ++c) gap = std::max(gap, std::abs(row[c] - dense[c]));
    }
    return gap;
}

}  // namespace

TEST(SparseConv, SubmanifoldMatchesDenseOracleOnActiveSites) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const int cin = 1 + trial % 4, cout = 1 + trial % 5;
        const SparseMap in = toy::sparse_map(rng, {6, 5, 7}, cin, 0.05 + 0.01 * trial);
        const auto w = toy::uniform(rng, std::size_t(kOffsets) * cin * cout);
        const auto b = toy::uniform(rng, cout);
        const auto r = sparse_conv_forward(in, SparseKind::submanifold, cout, w, b);
        EXPECT_EQ(r.out.sites, in.sites);
        EXPECT_LT(max_gap_at_sites(r.out, oracle::conv(densify(in), 1, cout, w, b)), 1e-5) << trial;
    }
}

TEST(SparseConv, DownsampleMatchesDenseOracleOnActiveSites) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const int cin = 1 + trial % 3, cout = 2 + trial % 4;
        const Index3 dims{5 + trial % 4, 6, 4 + trial % 3};
        const SparseMap in = toy::sparse_map(rng, dims, cin, 0.04 + 0.01 * trial);
        const auto w = toy::uniform(rng, std::size_t(kOffsets) * cin * cout);
        const auto b = toy::uniform(rng, cout);
        const auto r = sparse_conv_forward(in, SparseKind::downsample, cout, w, b);
        const DenseMap ref = oracle::conv(densify(in), 2, cout, w, b);
        EXPECT_EQ(r.out.dims, ref.dims);
        EXPECT_LT(max_gap_at_sites(r.out, ref), 1e-5) << trial;
    }
}

TEST(SparseConv, SingleVoxelDownsamplesToHalfIndex) {
    SparseMap in;
    in.dims = {8, 8, 8};
    in.channels = 1;
    in.sites = {{4, 4, 4}};
    in.features = {1.0};
    std::vector<double> w(kOffsets, 0.0);
    w[13] = 2.0;  // centre tap
    const auto r = sparse_conv_forward(in, SparseKind::downsample, 1, w, {});
    ASSERT_EQ(r.out.sites.size(), 1u);
    EXPECT_EQ(r.out.sites[0], (Index3{2, 2, 2}));
    EXPECT_EQ(r.out.dims, (Index3{4, 4, 4}));
    // Input 4 = 2*2 - 1 + 1 sits on the centre tap of output 2.
    EXPECT_DOUBLE_EQ(r.out.features[0], 2.0);
}

TEST(SparseConv, EmptyInputGivesEmptyOutput) {
    SparseMap in;
    in.dims = {4, 4, 4};
    in.channels = 2;
    const auto r = sparse_conv_forward(in, SparseKind::downsample, 3, std::vector<double>(kOffsets * 6, 1.0), {});
    EXPECT_TRUE(r.out.sites.empty());
    EXPECT_THROW(sparse_conv_forward(in, SparseKind::submanifold, 3, std::vector<double>(5), {}), DataError);
}

TEST(DenseConv, MatchesOracleForBothStrides) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int stride = 1 + trial % 2, cin = 1 + trial % 3, cout = 1 + trial % 4;
        DenseMap in({3 + trial % 4, 5, 4}, cin);
        in.data = toy::uniform(rng, in.data.size());
        const auto w = toy::uniform(rng, std::size_t(kOffsets) * cin * cout);
        const auto b = toy::uniform(rng, cout);
        const DenseMap got = conv_forward(in, stride, cout, w, b);
        const DenseMap ref = oracle::conv(in, stride, cout, w, b);
        ASSERT_EQ(got.dims, ref.dims);
        for (std::size_t i = 0; i < got.data.size(); ++i) EXPECT_NEAR(got.data[i], ref.data[i], 1e-12);
    }
}

TEST(TransposedConv, MatchesSummationOracle) {
    std::mt19937_64 rng(4);
    for (int stride : {1, 2}) {
        for (int trial = 0; trial < 5; ++trial) {
            const int cin = 1 + trial % 3, cout = 1 + trial % 2;
            DenseMap in({4, 4, 4}, cin);
            in.data = toy::uniform(rng, in.data.size());
            const auto w = toy::uniform(rng, std::size_t(kOffsets) * cin * cout);
            const auto b = toy::uniform(rng, cout);
            const Index3 od = stride == 1 ? Index3{4, 4, 4} : Index3{8, 7 + trial % 2, 8};
            ASSERT_TRUE(transposed_dims_ok(in.dims, od, stride));
            const DenseMap got = transposed_conv_forward(in, stride, cout, od, w, b);
            const DenseMap ref = oracle::tconv(in, stride, cout, od, w, b);
            for (std::size_t i = 0; i < got.data.size(); ++i) EXPECT_NEAR(got.data[i], ref.data[i], 1e-6);
        }
    }
}

TEST(TransposedConv, IsTheAdjointOfConvolution) {
    // <conv(x), y> == <x, tconv(y)> with channel roles swapped in W.
    std::mt19937_64 rng(5);
    const int cin = 2, cout = 3;
    DenseMap x({6, 5, 4}, cin);
    x.data = toy::uniform(rng, x.data.size());
    const auto w = toy::uniform(rng, std::size_t(kOffsets) * cin * cout);
    std::vector<double> wt(w.size());
    for (int k = 0; k < kOffsets; ++k)
        for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < cout; ++co) wt[(std::size_t(k) * cout + co) * cin + ci] = w[(std::size_t(k) * cin + ci) * cout + co];
    const DenseMap y0 = conv_forward(x, 2, cout, w, {});
    DenseMap y(y0.dims, cout);
    y.data = toy::uniform(rng, y.data.size());
    const DenseMap xt = transposed_conv_forward(y, 2, cin, x.dims, wt, {});
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) lhs += y0.data[i] * y.data[i];
    for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * xt.data[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(TransposedConv, RejectsInvalidOutputExtents) {
    EXPECT_FALSE(transposed_dims_ok({4, 4, 4}, {9, 8, 8}, 2));
    EXPECT_FALSE(transposed_dims_ok({4, 4, 4}, {6, 8, 8}, 2));
    EXPECT_TRUE(transposed_dims_ok({4, 4, 4}, {7, 8, 8}, 2));
}

TEST(AvgPool, AveragesClippedWindows) {
    DenseMap in({3, 2, 2}, 1);
    for (std::size_t i = 0; i < in.data.size(); ++i) in.data[i] = double(i);
    const DenseMap out = avg_pool2(in);
    ASSERT_EQ(out.dims, (Index3{2, 1, 1}));
    EXPECT_DOUBLE_EQ(out.data[0], (0 + 1 + 2 + 3 + 4 + 5 + 6 + 7) / 8.0);
    EXPECT_DOUBLE_EQ(out.data[1], (8 + 9 + 10 + 11) / 4.0);
}

TEST(Activations, SigmoidAndSoftplusAreStable) {
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
    EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
    EXPECT_EQ(sigmoid(800.0), 1.0);
    EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
    EXPECT_GT(softplus(-800.0), -1e-300);
    std::vector<double> v{-1.0, 2.0};
    leaky_relu(v);
    EXPECT_DOUBLE_EQ(v[0], -0.2);
    EXPECT_DOUBLE_EQ(v[1], 2.0);
}
