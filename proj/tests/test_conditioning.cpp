#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "vstain/conditioning.hpp"
#include "vstain/synthdata.hpp"

using namespace vstain;

namespace {

Tensor rand_img(int n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    return Tensor::rand_uniform({n, n, 3}, rng, -1.0, 1.0);
}

}  // namespace

TEST_CASE("random-projection encoder matches pool+project oracle") {
    RandomProjectionEncoder enc(16, 7);
    Tensor img = rand_img(16, 1);
    Tensor out = enc.encode(img);
    REQUIRE(out.shape == std::vector<int64_t>({16}));
    // Oracle: BT.601 luma, 8x8 average pool, then the stored projection.
    const int64_t H = 16, W = 16, bh = 2, bw = 2;
    std::vector<double> pooled(64, 0.0);
    for (int64_t i = 0; i < 8; ++i)
        for (int64_t j = 0; j < 8; ++j) {
            double acc = 0.0;
            for (int64_t u = 0; u < bh; ++u)
                for (int64_t v = 0; v < bw; ++v) {
                    const int64_t base = ((i * bh + u) * W + j * bw + v) * 3;
                    acc += 0.299 * img[base] + 0.587 * img[base + 1] + 0.114 * img[base + 2];
                }
            pooled[size_t(i * 8 + j)] = acc / double(bh * bw);
        }
    for (int64_t d = 0; d < 16; ++d) {
        double acc = 0.0;
        for (int64_t k = 0; k < 64; ++k) acc += pooled[size_t(k)] * enc.projection().at2(k, d);
        CHECK(out[d] == doctest::Approx(acc).epsilon(1e-12));
    }
    (void)H;
}

TEST_CASE("encoder supports the paper-scale embedding width") {
    RandomProjectionEncoder enc(1536, 3);
    CHECK(enc.dim() == 1536);
    CHECK(enc.encode(rand_img(16, 2)).numel() == 1536);
}

TEST_CASE("encoder is deterministic under seed and sensitive to input") {
    RandomProjectionEncoder a(32, 5), b(32, 5), c(32, 6);
    Tensor img = rand_img(16, 3);
    Tensor ea = a.encode(img), eb = b.encode(img), ec = c.encode(img);
    double diff_seed = 0.0;
    for (int64_t i = 0; i < 32; ++i) {
        CHECK(ea[i] == eb[i]);
        diff_seed += std::fabs(ea[i] - ec[i]);
    }
    CHECK(diff_seed > 1e-6);
    Tensor e2 = a.encode(rand_img(16, 4));
    double diff_img = 0.0;
    for (int64_t i = 0; i < 32; ++i) diff_img += std::fabs(ea[i] - e2[i]);
    CHECK(diff_img > 1e-6);
}

TEST_CASE("cfg dropout joint-drops within binomial bounds and never mutates input") {
    auto codec = make_codec({CodecKind::fixed_orthogonal, 4, 4}, 0);
    codec->latent_scale = 1.0;
    codec->scale_fitted = true;
    RandomProjectionEncoder enc(8, 1);
    ConditionBundle src = make_bundle(rand_img(16, 9), enc, *codec);
    REQUIRE_FALSE(src.sem_dropped);
    const Tensor null_sem = Tensor::full({8}, -7.0);
    const Tensor src_sem = src.c_sem;

    std::mt19937_64 rng(99);
    const int n = 10000;
    const double p = 0.11;
    int dropped = 0;
    for (int i = 0; i < n; ++i) {
        ConditionBundle out = apply_cfg_dropout(src, p, rng, null_sem);
        CHECK(out.sem_dropped == out.spatial_dropped);  // joint, never one-sided
        if (out.sem_dropped) {
            ++dropped;
            for (int64_t d = 0; d < 8; ++d) CHECK(out.c_sem[d] == -7.0);
        }
    }
    // 5 sigma binomial bounds around n*p.
    const double sigma = std::sqrt(n * p * (1.0 - p));
    CHECK(double(dropped) > n * p - 5.0 * sigma);
    CHECK(double(dropped) < n * p + 5.0 * sigma);
    for (int64_t d = 0; d < 8; ++d) CHECK(src.c_sem[d] == src_sem[d]);  // untouched
    CHECK_FALSE(src.sem_dropped);
}

TEST_CASE("cfg dropout is reproducible under seed") {
    auto codec = make_codec({CodecKind::fixed_orthogonal, 4, 4}, 0);
    codec->latent_scale = 1.0;
    codec->scale_fitted = true;
    RandomProjectionEncoder enc(8, 1);
    ConditionBundle src = make_bundle(rand_img(16, 10), enc, *codec);
    const Tensor null_sem = Tensor::zeros({8});
    std::vector<bool> a, b;
    for (int rep = 0; rep < 2; ++rep) {
        std::mt19937_64 rng(7);
        auto& dst = rep == 0 ? a : b;
        for (int i = 0; i < 200; ++i)
            dst.push_back(apply_cfg_dropout(src, 0.5, rng, null_sem).sem_dropped);
    }
    CHECK(a == b);
}

TEST_CASE("make_bundle carries the scaled spatial latent") {
    auto codec = make_codec({CodecKind::fixed_orthogonal, 4, 4}, 0);
    codec->latent_scale = 0.5;
    codec->scale_fitted = true;
    RandomProjectionEncoder enc(8, 1);
    Tensor img = rand_img(16, 11);
    ConditionBundle bundle = make_bundle(img, enc, *codec);
    CHECK(bundle.spatial_latent.shape == std::vector<int64_t>({4, 4, 4}));
    Tensor raw = codec->encode_raw(img);
    for (int64_t i = 0; i < raw.numel(); ++i)
        CHECK(bundle.spatial_latent[i] == doctest::Approx(raw[i] * 0.5).epsilon(1e-12));
    Tensor sem = enc.encode(img);
    for (int64_t i = 0; i < 8; ++i) CHECK(bundle.c_sem[i] == sem[i]);
}

TEST_CASE("tiny-vit encoder trains on labels and freezes to a deterministic embedding") {
    synth::GeneratorSpec spec;
    spec.image_size = 16;
    spec.seed = 50;
    std::vector<Tensor> imgs;
    std::vector<int> labels;
    for (int i = 0; i < 24; ++i) {
        auto pr = synth::generate_pair(spec);
        ++spec.seed;
        imgs.push_back(pr.he);
        labels.push_back(int(pr.label));
    }
    TinyVitEncoder enc(16, 4, 16, 1, 2, 4, 13);
    auto fit = enc.fit(imgs, labels, 40, 8, 1e-3, 3);
    CHECK(fit.final_loss < fit.first_loss);
    Tensor e1 = enc.encode(imgs[0]);
    Tensor e2 = enc.encode(imgs[0]);
    REQUIRE(e1.numel() == 16);
    for (int64_t i = 0; i < 16; ++i) CHECK(e1[i] == e2[i]);
}
