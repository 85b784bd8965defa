"""Counter-based noise: reference implementation, determinism, statistics.

The reference Philox below is written from the published algorithm (integer
arithmetic only, no numpy) and is the primary oracle: the production
vectorized generator must agree with it bit-for-bit, and both must reproduce
the published known-answer vectors.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtri

from spinflow import noise

MASK32 = 0xFFFFFFFF


def reference_philox(ctr, key):
    """Philox-4x32-10 on Python ints, straight from the round definition."""
    c = list(ctr)
    k = list(key)
    for rnd in range(10):
        if rnd:
            k[0] = (k[0] + 0x9E3779B9) & MASK32
            k[1] = (k[1] + 0xBB67AE85) & MASK32
        p0 = 0xD2511F53 * c[0]
        p1 = 0xCD9E8D57 * c[2]
        c = [
            (p1 >> 32) ^ c[1] ^ k[0],
            p1 & MASK32,
            (p0 >> 32) ^ c[3] ^ k[1],
            p0 & MASK32,
        ]
    return tuple(c)


def reference_gaussian(seed, step, site, comp, n_components, stream=0):
    """Scalar re-derivation of one Gaussian lane through the frozen mapping."""
    lane = site * n_components + comp
    words = reference_philox(
        (step, lane // 2, stream, 0), (seed & MASK32, (seed >> 32) & MASK32)
    )
    pair = words[0:2] if lane % 2 == 0 else words[2:4]
    x = (pair[0] << 32) | pair[1]
    u = ((x >> 11) + 0.5) * 2.0**-53
    return float(ndtri(u))


# Known-answer vectors for the ten-round 4x32 generator (Random123 test set).
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    (
        (MASK32, MASK32, MASK32, MASK32),
        (MASK32, MASK32),
        (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD),
    ),
    (
        (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
        (0xA4093822, 0x299F31D0),
        (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
    ),
]


class TestPhiloxCore:
    @pytest.mark.parametrize("ctr,key,expected", KAT)
    def test_known_answer_vectors(self, ctr, key, expected):
        assert reference_philox(ctr, key) == expected
        got = noise.philox4x32(*(np.uint32(x) for x in ctr), *(np.uint32(x) for x in key))
        assert tuple(int(w) for w in got) == expected

    @given(
        ctr=st.tuples(*[st.integers(0, MASK32)] * 4),
        key=st.tuples(*[st.integers(0, MASK32)] * 2),
    )
    @settings(max_examples=200, deadline=None)
    def test_vectorized_matches_reference(self, ctr, key):
        got = noise.philox4x32(*(np.uint32(x) for x in ctr), *(np.uint32(x) for x in key))
        assert tuple(int(w) for w in got) == reference_philox(ctr, key)

    def test_block_call_matches_elementwise(self):
        rng = np.random.default_rng(5)
        C = rng.integers(0, 2**32, size=(4, 64), dtype=np.uint64).astype(np.uint32)
        K = rng.integers(0, 2**32, size=(2, 64), dtype=np.uint64).astype(np.uint32)
        out = noise.philox4x32(C[0], C[1], C[2], C[3], K[0], K[1])
        for j in range(64):
            ref = reference_philox([int(C[i, j]) for i in range(4)], [int(K[i, j]) for i in range(2)])
            assert tuple(int(out[i][j]) for i in range(4)) == ref


class TestGaussianBlock:
    def test_lane_mapping_matches_reference(self):
        seed = 0x0123456789ABCDEF
        block = noise.gaussian_block(seed, 3, 6, n_sites=5, n_components=3)
        assert block.shape == (3, 5, 3)
        for step_off, step in enumerate(range(3, 6)):
            for site in (0, 2, 4):
                for comp in range(3):
                    expected = reference_gaussian(seed, step, site, comp, 3)
                    assert block[step_off, site, comp] == expected

    def test_deterministic(self):
        a = noise.gaussian_block(42, 0, 10, 20, 2)
        b = noise.gaussian_block(42, 0, 10, 20, 2)
        np.testing.assert_array_equal(a, b)

    def test_seed_batching_bitwise(self):
        seeds = noise.spawn_seeds(7, 6)
        batch = noise.gaussian_block(seeds, 2, 8, 10, 3)
        assert batch.shape == (6, 6, 10, 3)
        for r, s in enumerate(seeds):
            np.testing.assert_array_equal(batch[r], noise.gaussian_block(int(s), 2, 8, 10, 3))

    def test_streams_do_not_collide(self):
        a = noise.gaussian_block(9, 0, 4, 6, 2, stream=noise.STREAM_NOISE)
        b = noise.gaussian_block(9, 0, 4, 6, 2, stream=noise.STREAM_ACCEPT)
        assert not np.array_equal(a, b)

    def test_moments(self):
        g = noise.gaussian_block(314159, 0, 3000, 20, 3)
        n = g.size
        assert abs(g.mean()) < 4.0 / np.sqrt(n)
        assert abs(g.var() - 1.0) < 4.0 * np.sqrt(2.0 / n)


class TestUniformStreams:
    def test_accept_uniforms_open_interval(self):
        u = noise.accept_uniforms(123, 0, 200_000)
        assert u.shape == (200_000,)
        assert np.all(u > 0.0) and np.all(u < 1.0)
        assert abs(u.mean() - 0.5) < 4.0 / np.sqrt(12.0 * u.size)

    def test_uniform_value_from_reference_words(self):
        seed, step = 99, 17
        w = reference_philox((step, 0, noise.STREAM_ACCEPT, 0), (99, 0))
        x = (w[0] << 32) | w[1]
        expected = ((x >> 11) + 0.5) * 2.0**-53
        assert noise.accept_uniforms(seed, step, step + 1)[0] == expected

    def test_batched_seeds(self):
        seeds = np.array([1, 2, 3], dtype=np.uint64)
        u = noise.accept_uniforms(seeds, 0, 5)
        assert u.shape == (3, 5)
        for r, s in enumerate(seeds):
            np.testing.assert_array_equal(u[r], noise.accept_uniforms(int(s), 0, 5))


class TestSpawnSeeds:
    def test_matches_reference(self):
        got = noise.spawn_seeds(0xDEADBEEF, 4)
        for idx in range(4):
            w = reference_philox((idx, 0, noise.STREAM_SPAWN, 0), (0xDEADBEEF, 0))
            assert int(got[idx]) == (w[0] << 32) | w[1]

    def test_distinct_and_offsettable(self):
        full = noise.spawn_seeds(1, 64)
        assert len(set(full.tolist())) == 64
        np.testing.assert_array_equal(noise.spawn_seeds(1, 60, start=4), full[4:])


class TestBrownianLattice:
    def test_same_seed_identical_tensors(self):
        a = noise.generate(2718, 20, 2, 1e-4, 256).increments
        b = noise.generate(2718, 20, 2, 1e-4, 256).increments
        np.testing.assert_array_equal(a, b)

    def test_contract_aliases(self):
        p = noise.generate(1, 20, 2, 1e-4, 8)
        assert p.M == 20 and p.dt_ref == 1e-4 and p.n_steps == 8 and p.m == 2

    def test_pooled_variance_band(self):
        # 1e6+ pooled increments at dt_ref = 1e-4: 4-sigma chi-square band
        p = noise.generate(55, 20, 2, 1e-4, 16_700)
        v = p.increments.var()
        assert 0.98e-4 < v < 1.02e-4

    def test_cross_site_independence(self):
        p = noise.generate(505, 10, 1, 1e-4, 4096)
        inc = p.increments / np.sqrt(p.dt)
        for other in (1, 4, 7):
            rho = np.mean(inc[:, 0, 0] * inc[:, other, 0])
            assert abs(rho) < 4.0 / np.sqrt(p.n_steps)

    def test_window_equals_slice(self):
        p = noise.generate(31337, 12, 2, 2e-5, 512)
        np.testing.assert_array_equal(p.window(100, 300), p.increments[100:300])

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            noise.generate(0, 20, 2, -1e-4, 10)
        with pytest.raises(ValueError):
            noise.generate(0, 20, 5, 1e-4, 10)
        p = noise.generate(0, 20, 2, 1e-4, 10)
        with pytest.raises(ValueError):
            p.window(4, 12)
        with pytest.raises(ValueError):
            p.mh_noise(10)

    def test_memory_cap_forces_streaming(self):
        p = noise.generate(0, 20, 2, 1e-4, 1000, memory_cap=100)
        with pytest.raises(MemoryError):
            _ = p.increments
        assert p.window(0, 1).shape == (1, 20, 3)


class TestCoarsen:
    def test_factor_one_identical(self):
        p = noise.generate(8, 20, 2, 1e-4, 64)
        np.testing.assert_array_equal(p.coarsen(1).increments, p.increments)

    def test_block_sums(self):
        p = noise.generate(9, 20, 2, 1e-4, 64)
        coarse = p.coarsen(16)
        assert coarse.dt == pytest.approx(16e-4)
        assert coarse.n_steps == 4
        expected = p.increments.reshape(4, 16, 20, 3).sum(axis=1)
        np.testing.assert_allclose(coarse.increments, expected, rtol=1e-12, atol=1e-18)

    def test_total_sum_preserved(self):
        p = noise.generate(10, 20, 1, 1e-4, 128)
        total_fine = p.increments.sum(axis=0)
        total_coarse = p.coarsen(32).increments.sum(axis=0)
        np.testing.assert_allclose(total_coarse, total_fine, rtol=1e-12, atol=1e-15)

    def test_raw_blocks_exact_across_levels(self):
        # the unscaled Gaussian sums are the canonical quantity: bit-exact
        p = noise.generate(11, 6, 2, 1e-3, 96)
        c = p.coarsen(4)
        np.testing.assert_array_equal(
            c.raw_block(0, 24),
            p.raw_block(0, 96).reshape(24, 4, 6, 3).sum(axis=1),
        )

    @given(f1=st.sampled_from([2, 4, 8]), f2=st.sampled_from([2, 3]))
    @settings(max_examples=20, deadline=None)
    def test_coarsen_composes(self, f1, f2):
        p = noise.generate(12, 5, 1, 1e-4, 48)
        two_step = p.coarsen(f1).coarsen(f2)
        one_step = p.coarsen(f1 * f2)
        np.testing.assert_array_equal(two_step.raw_block(0, two_step.n_steps),
                                      one_step.raw_block(0, one_step.n_steps))
        assert two_step.dt == one_step.dt

    def test_variance_scales_with_factor(self):
        p = noise.generate(13, 20, 2, 1e-4, 8192)
        v = p.coarsen(8).increments.var()
        assert abs(v - 8e-4) < 4.0 * np.sqrt(2.0 / (1024 * 60)) * 8e-4

    def test_invalid_factor(self):
        p = noise.generate(0, 20, 2, 1e-4, 10)
        with pytest.raises(ValueError):
            p.coarsen(3)


class TestMhNoise:
    def test_deterministic_and_site_addressable(self):
        p = noise.generate(404, 20, 2, 1e-4, 32)
        w = noise.mh_noise(p, 5)
        np.testing.assert_array_equal(w, p.mh_noise(5))
        np.testing.assert_array_equal(noise.mh_noise(p, 5, 7), w[7])
        with pytest.raises(ValueError):
            p.mh_noise(5, 20)

    def test_unit_variance(self):
        p = noise.generate(606, 20, 2, 1e-4, 1700)
        w = np.stack([p.mh_noise(n) for n in range(0, 1700, 17)])
        n = w.size
        assert abs(w.var() - 1.0) < 4.0 * np.sqrt(2.0 / n) + 4.0 / np.sqrt(n)

    def test_coupling_identity(self):
        """eps * w equals sqrt(N/beta) * dW on every step and resolution."""
        N, beta, dt = 10, 4.0, 1e-4
        eps = np.sqrt(N * dt / beta)
        p = noise.generate(707, 20, 2, dt, 64)
        for path in (p, p.coarsen(8)):
            scale = np.sqrt(N / beta)
            e = np.sqrt(N * path.dt / beta)
            for step in (0, path.n_steps // 2, path.n_steps - 1):
                lhs = e * path.mh_noise(step)
                rhs = scale * path.window(step, step + 1)[0]
                np.testing.assert_allclose(lhs, rhs, rtol=1e-14)
        assert eps == pytest.approx(np.sqrt(N * p.dt / beta))
