//! Randomized checks of the library's structural invariants. Each block
//! states the invariant it enforces; tolerances are the analytical slack
//! plus float rounding, never tuned to make a failing case pass.

use proptest::prelude::*;

use loopshape::analysis::{
    cosine_similarity, estimate_eta, measure_gain, predict_gain, RDCurve, RatePoint,
};
use loopshape::codec::{decode_subsequence, encode_sequence, CodecConfig, ReshaperSelect};
use loopshape::entropy::{self, SymbolModel};
use loopshape::motion::{block_sad, compensate, full_search};
use loopshape::reshaper::{OnePieceReshaper, TwoPieceReshaper};
use loopshape::signal::{make_synthetic, Plane, Raster, SyntheticKind};
use loopshape::theory::{
    entropy_gain_one_piece, entropy_gain_two_piece, hd_curve, rd_curves, TheoryParams,
};
use loopshape::transform::{
    codeword_index, dct4_forward, dct4_inverse, forward_frame, inverse_frame, QuantizerSpec,
    QP_LADDER,
};

const M: f64 = 1023.0;

fn sum_sq(data: &[f64]) -> f64 {
    data.iter().map(|v| v * v).sum()
}

// ------------------------------------------------------------ transform ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Codeword residue index - x/q stays in (-1/2, 1/2] for every ladder
    /// step (half-up ties land on the closed end).
    #[test]
    fn quantizer_residue_in_half_open_interval(
        x in -1.0e5f64..1.0e5,
        qp_idx in 0usize..QP_LADDER.len(),
    ) {
        let q = QP_LADDER[qp_idx].1;
        let e = codeword_index(x, q) as f64 - x / q;
        prop_assert!(e > -0.5 - 1e-9 && e <= 0.5 + 1e-9, "residue {e} for x={x} q={q}");
    }

    /// The 4x4 transform inverts exactly and preserves block energy.
    #[test]
    fn transform_round_trip_and_energy(
        block in prop::array::uniform4(prop::array::uniform4(-2000.0f64..2000.0)),
    ) {
        let coeffs = dct4_forward(&block);
        let back = dct4_inverse(&coeffs);
        let mut in_sq = 0.0;
        let mut out_sq = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                prop_assert!((back[r][c] - block[r][c]).abs() <= 1e-9);
                in_sq += block[r][c] * block[r][c];
                out_sq += coeffs[r][c] * coeffs[r][c];
            }
        }
        prop_assert!((out_sq - in_sq).abs() <= 1e-9 * in_sq.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Blockwise whole-frame transform preserves the frame l2 norm and
    /// inverts exactly.
    #[test]
    fn frame_transform_preserves_norm(
        (w, h, data) in (1usize..6, 1usize..6).prop_flat_map(|(bw, bh)| {
            let (w, h) = (bw * 4, bh * 4);
            (Just(w), Just(h), prop::collection::vec(-512.0f64..512.0, w * h))
        }),
    ) {
        let frame = Raster::from_data(w, h, data);
        let coeffs = forward_frame(&frame);
        let back = inverse_frame(&coeffs);
        prop_assert!((sum_sq(coeffs.data()) - sum_sq(frame.data())).abs()
            <= 1e-9 * sum_sq(frame.data()).max(1.0));
        for (a, b) in back.data().iter().zip(frame.data()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

// ------------------------------------------------------------- reshaper ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// One-piece map: monotone over the full intensity range, inverse exact
    /// on the middle segment, outputs confined to the declared ranges.
    #[test]
    fn one_piece_monotone_and_invertible(
        a in 0.0f64..0.6,
        width in 0.05f64..0.9,
    ) {
        let b = (a + width).min(0.999);
        let shaper = OnePieceReshaper::new(a, b, M).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1023u32 {
            let x = f64::from(i);
            let y = shaper.forward(x);
            prop_assert!(y >= prev - 1e-12, "not monotone at {x}");
            prop_assert!((0.0..=M).contains(&y));
            prev = y;
            let z = shaper.backward(y);
            prop_assert!((a * M..=b * M + 1e-9).contains(&z));
            if x > a * M + 1e-9 && x < b * M - 1e-9 {
                prop_assert!((z - x).abs() <= 1e-9, "inverse off by {} at {x}", z - x);
            }
        }
    }

    /// Two-piece map: same monotonicity/inverse/range contract on both
    /// interior segments.
    #[test]
    fn two_piece_monotone_and_invertible(
        a1 in 0.02f64..0.3,
        d2 in 0.05f64..0.4,
        d3 in 0.05f64..0.4,
        k1 in 0.2f64..2.5,
    ) {
        let (a2, a3) = (a1 + d2, a1 + d2 + d3);
        prop_assume!(a3 <= 0.95);
        prop_assume!(k1 * (a2 - a1) < 0.98);
        let shaper = TwoPieceReshaper::new(a1, a2, a3, k1, M).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1023u32 {
            let x = f64::from(i);
            let y = shaper.forward(x);
            prop_assert!(y >= prev - 1e-12, "not monotone at {x}");
            prop_assert!((-1e-12..=M + 1e-12).contains(&y));
            prev = y;
            let z = shaper.backward(y);
            prop_assert!((a1 * M - 1e-9..=a3 * M + 1e-9).contains(&z));
            let interior = x > a1 * M + 1e-9 && x < a3 * M - 1e-9 && (x - a2 * M).abs() > 1e-9;
            if interior {
                prop_assert!((z - x).abs() <= 1e-9, "inverse off by {} at {x}", z - x);
            }
        }
    }

    /// A two-piece map whose segments share one slope is the one-piece map
    /// over the outer breakpoints, pointwise.
    #[test]
    fn two_piece_with_equal_slopes_collapses(
        a1 in 0.02f64..0.4,
        d2 in 0.05f64..0.3,
        d3 in 0.05f64..0.3,
    ) {
        let (a2, a3) = (a1 + d2, a1 + d2 + d3);
        prop_assume!(a3 <= 0.95);
        let k = 1.0 / (a3 - a1);
        let two = TwoPieceReshaper::new(a1, a2, a3, k, M).unwrap();
        let one = OnePieceReshaper::new(a1, a3, M).unwrap();
        prop_assert!((two.k2() - k).abs() <= 1e-12);
        for i in 0..=1023u32 {
            let x = f64::from(i);
            prop_assert!((two.forward(x) - one.forward(x)).abs() <= 1e-9);
        }
    }

    /// Entropy-shift formulas agree when the two-segment shift uses one
    /// slope, for every occupancy split.
    #[test]
    fn entropy_shift_collapse_for_all_occupancies(w in 0.0f64..=1.0, k in 1.0f64..8.0) {
        let one = entropy_gain_one_piece(k).unwrap();
        let two = entropy_gain_two_piece(w, 1.0 - w, k, k).unwrap();
        prop_assert!((two - one).abs() <= 1e-12);
    }
}

// -------------------------------------------------------------- entropy ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Coding is lossless for every granularity setting.
    #[test]
    fn coder_round_trips_any_stream(
        stream in prop::collection::vec(-4096i64..=4096, 1..400),
        g_idx in 0usize..4,
    ) {
        let g = [1u32, 10, 100, 1000][g_idx];
        let model = SymbolModel::from_indices(&stream, g).unwrap();
        let bytes = entropy::encode_to_bytes(&stream, &model).unwrap();
        let back = entropy::decode(&bytes, &model, stream.len()).unwrap();
        prop_assert_eq!(back, stream);
    }

    /// Model probabilities form a distribution and cover the whole universe
    /// once the coarse knob adds prior mass.
    #[test]
    fn model_is_a_distribution(
        stream in prop::collection::vec(-200i64..=200, 2..300),
        probe in -4096i64..=4096,
    ) {
        for g in [1u32, 10, 100, 1000] {
            let model = SymbolModel::from_indices(&stream, g).unwrap();
            prop_assert!((model.probability_sum() - 1.0).abs() <= 1e-9);
            if model.effective_granularity() > 1 {
                prop_assert!(model.probability(probe) > 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Degrading the model monotonically in the coarse knob never lowers
    /// the rate, and the rate never falls below the stream entropy. At the
    /// exact-histogram setting the rate equals the entropy up to the
    /// integer rounding of model weights.
    #[test]
    fn rate_ordering_across_granularities(
        stream in prop::collection::vec(-80i64..=80, 1000..2500),
    ) {
        let distinct = entropy::histogram(&stream).len();
        prop_assume!(distinct >= 2);
        let h = entropy::measure_entropy(&stream).unwrap();
        let mut prev = 0.0f64;
        for (i, g) in [1u32, 10, 100, 1000].into_iter().enumerate() {
            let model = SymbolModel::from_indices(&stream, g).unwrap();
            let rate = entropy::expected_rate(&stream, &model).unwrap();
            prop_assert!(rate >= h - 1e-9, "rate {rate} below entropy {h} at g={g}");
            if g == 1 {
                prop_assert!(rate - h <= 1e-4, "exact model {} bits over entropy", rate - h);
            }
            if i > 0 {
                prop_assert!(rate >= prev - 1e-6, "rate fell from {prev} to {rate} at g={g}");
            }
            prev = rate;
            // The byte-level stream tracks the statistic to flush + slack.
            let bits = entropy::encode(&stream, &model).unwrap() as f64;
            let coded = bits / stream.len() as f64;
            prop_assert!((coded - rate).abs() <= 72.0 / stream.len() as f64 + 0.01);
        }
    }
}

// --------------------------------------------------------------- motion ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Full search is exhaustive: per macroblock it attains the minimum
    /// SAD, never worsens when the range grows, and repeats bit-identically.
    #[test]
    fn full_search_is_optimal_monotone_deterministic(
        cur_data in prop::collection::vec(0.0f64..1023.0, 32 * 32),
        ref_data in prop::collection::vec(0.0f64..1023.0, 32 * 32),
    ) {
        let cur = Raster::from_data(32, 32, cur_data);
        let refr = Raster::from_data(32, 32, ref_data);
        let mut best_by_range = Vec::new();
        for range in [1i32, 2, 4] {
            let field = full_search(&cur, &refr, range).unwrap();
            let again = full_search(&cur, &refr, range).unwrap();
            prop_assert_eq!(field.vectors(), again.vectors());
            let mut bests = Vec::new();
            for by in 0..field.rows() {
                for bx in 0..field.cols() {
                    let (dx, dy) = field.get(bx, by);
                    let chosen = block_sad(&cur, &refr, bx * 16, by * 16, dx, dy);
                    let mut min_sad = f64::INFINITY;
                    for cy in -range..=range {
                        for cx in -range..=range {
                            min_sad = min_sad.min(block_sad(&cur, &refr, bx * 16, by * 16, cx, cy));
                        }
                    }
                    prop_assert!(chosen <= min_sad, "chosen {chosen} vs best {min_sad}");
                    bests.push(chosen);
                }
            }
            best_by_range.push(bests);
        }
        for w in best_by_range.windows(2) {
            for (narrow, wide) in w[0].iter().zip(&w[1]) {
                prop_assert!(wide <= narrow, "wider range worsened SAD {narrow} -> {wide}");
            }
        }
        // Compensation with the zero field reproduces the reference.
        let zero = full_search(&refr, &refr, 1).unwrap();
        let comp = compensate(&refr, &zero).unwrap();
        prop_assert_eq!(comp.data(), refr.data());
    }
}

// ---------------------------------------------------------------- codec ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// The loop is closed: a standalone replay from payloads reproduces the
    /// encoder's reconstructions exactly, and every reconstructed sample
    /// stays inside the sample range.
    #[test]
    fn decoder_replay_matches_encoder_loop(
        seed in 0u64..1_000_000,
        use_innovation in any::<bool>(),
        reshape in any::<bool>(),
        qp_idx in 0usize..QP_LADDER.len(),
    ) {
        let kind = if use_innovation {
            SyntheticKind::innovation(192, 831, 20.0)
        } else {
            SyntheticKind::iid_noise(192, 831)
        };
        let seq = make_synthetic(&kind, 32, 32, 4, 10, seed).unwrap();
        let select = if reshape {
            ReshaperSelect::Estimate { margin: 0.0 }
        } else {
            ReshaperSelect::Identity
        };
        let mut cfg = CodecConfig::new(QuantizerSpec::ladder()[qp_idx], select, 10, 4);
        cfg.keep_payload = true;
        let sub = encode_sequence(&seq, &cfg).unwrap().remove(0);
        let recs = decode_subsequence(&sub, 32, 32, M).unwrap();
        prop_assert_eq!(recs.len(), seq.frames.len());
        for ((rec, plane), fr) in recs.iter().zip(&seq.frames).zip(&sub.frames) {
            prop_assert!(rec.data().iter().all(|&v| (0.0..=M).contains(&v)));
            let replay_mse = rec.mse(&plane.to_raster());
            prop_assert!(
                replay_mse == fr.mse,
                "drift: replay MSE {replay_mse} vs loop MSE {}",
                fr.mse
            );
        }
    }
}

// ----------------------------------------------------------------- signal ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Padding to macroblock multiples never alters original samples.
    #[test]
    fn padding_preserves_original_samples(
        (w, h, samples) in (1usize..40, 1usize..40).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), prop::collection::vec(0u16..=1023, w * h))
        }),
    ) {
        let plane = Plane::new(w, h, 10, samples).unwrap();
        let padded = plane.pad_to_macroblock();
        prop_assert!(padded.is_macroblock_aligned());
        for y in 0..h {
            for x in 0..w {
                prop_assert_eq!(padded.get(x, y), plane.get(x, y));
            }
        }
    }
}

// --------------------------------------------------------------- analysis ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Swapping the two curves negates the measured gain.
    #[test]
    fn measured_gain_is_antisymmetric(
        r0 in 0.5f64..2.0,
        steps in prop::collection::vec((0.1f64..1.0, -3.0f64..3.0), 3..8),
        psnr0 in 20.0f64..40.0,
        offs in -5.0f64..5.0,
        t in 0.05f64..0.95,
    ) {
        let mut r = r0;
        let mut pts_a = Vec::new();
        let mut pts_b = Vec::new();
        for (dr, dp) in &steps {
            pts_a.push((r, psnr0 + (r - r0) * 8.0));
            pts_b.push((r, psnr0 + offs + (r - r0) * 8.0 + dp));
            r += dr;
        }
        let a = RDCurve::new(&pts_a).unwrap();
        let b = RDCurve::new(&pts_b).unwrap();
        let (lo, hi) = a.rate_span();
        let eval = lo + t * (hi - lo);
        let fw = measure_gain(&a, &b, eval).unwrap();
        let bw = measure_gain(&b, &a, eval).unwrap();
        prop_assert!((fw + bw).abs() <= 1e-12);
    }

    /// The slope-ratio estimate is invariant to rescaling the rate axis.
    #[test]
    fn slope_ratio_is_rate_scale_invariant(
        h_start in 1.0f64..3.0,
        dh in prop::collection::vec(0.2f64..0.8, 5..9),
        m0 in 1.2f64..3.0,
        k_hat in 1.3f64..2.5,
        c in 0.1f64..10.0,
        t in 0.3f64..0.7,
    ) {
        let mut h = h_start;
        let mut pts = Vec::new();
        for d in &dh {
            pts.push(RatePoint { entropy: h, rate: m0 * h * (1.0 + 0.02 * h), qp: 0, reshaped: false });
            h += d;
        }
        let (rlo, rhi) = (pts.first().unwrap().rate, pts.last().unwrap().rate);
        let r0 = rlo + t * (rhi - rlo);
        let scaled: Vec<RatePoint> = pts
            .iter()
            .map(|p| RatePoint { rate: c * p.rate, ..*p })
            .collect();
        let e1 = estimate_eta(&pts, r0, k_hat);
        let e2 = estimate_eta(&scaled, c * r0, k_hat);
        // Both must fail together (shifted entropy outside the hull) or
        // agree.
        match (e1, e2) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x.eta - y.eta).abs() <= 1e-9 * x.eta.max(1e-9));
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "scale changed outcome: {a:?} vs {b:?}"),
        }
    }

    /// Predicted gain grows with the expansion factor and shrinks as the
    /// coder approaches ideal.
    #[test]
    fn predicted_gain_monotone_in_k_and_eta(
        eta in 0.05f64..0.95,
        deta in 0.01f64..0.04,
        k in 1.05f64..4.0,
        dk in 0.05f64..1.0,
    ) {
        let g = predict_gain(eta, k).unwrap();
        prop_assert!(predict_gain(eta, k + dk).unwrap() > g);
        prop_assert!(predict_gain(eta + deta, k).unwrap() < g);
        prop_assert!((predict_gain(1.0, k).unwrap()).abs() <= 1e-15);
    }

    /// Cosine similarity stays in [-1, 1].
    #[test]
    fn cosine_similarity_bounded(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..12),
    ) {
        let u: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let v: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(u.iter().any(|x| x.abs() > 1e-6) && v.iter().any(|x| x.abs() > 1e-6));
        let cos = cosine_similarity(&u, &v).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&cos));
    }

    /// With an ideal coder the reshaped curve coincides with the base one,
    /// and the base curve is the entropy-distortion law read at the
    /// rate-per-entropy slope.
    #[test]
    fn rate_curves_degenerate_without_coder_loss(
        n in 4.0f64..12.0,
        k in 1.1f64..4.0,
        m0 in 1.1f64..3.0,
        h0 in 0.0f64..3.0,
        h in 2.0f64..10.0,
    ) {
        let p = TheoryParams::new(n, 40.0, k, m0, 1.0, h0).unwrap();
        let r = m0 * (h + h0);
        let (d_base, d_resh) = rd_curves(r, &p);
        prop_assert!((d_resh - d_base).abs() <= 1e-12 * d_base);
        let direct = hd_curve(h, n);
        prop_assert!((d_base - direct).abs() <= 1e-9 * direct);
    }

    /// The closed-form gain equals the distortion ratio of the two curves
    /// at any rate.
    #[test]
    fn predicted_gain_matches_curve_ratio(
        n in 4.0f64..12.0,
        k in 1.1f64..4.0,
        m0 in 1.1f64..3.0,
        eta in 0.05f64..1.0,
        h0 in 0.0f64..3.0,
        r in 5.0f64..40.0,
    ) {
        let p = TheoryParams::new(n, 40.0, k, m0, eta, h0).unwrap();
        let (d_base, d_resh) = rd_curves(r, &p);
        let ratio_db = 10.0 * (d_base / d_resh).log10();
        let predicted = predict_gain(eta, k).unwrap();
        prop_assert!((ratio_db - predicted).abs() <= 1e-9);
    }
}

// Separate deterministic check: sample file round trips, both depths.
#[test]
fn yuv_round_trip_is_lossless() {
    for (bit_depth, seed) in [(8u8, 3u64), (10u8, 4u64)] {
        let hi = if bit_depth == 8 { 255 } else { 831 };
        let seq =
            make_synthetic(&SyntheticKind::iid_noise(0, hi), 32, 16, 3, bit_depth, seed).unwrap();
        let path = std::env::temp_dir().join(format!(
            "loopshape-props-{}-{bit_depth}.yuv",
            std::process::id()
        ));
        loopshape::signal::save_yuv(&path, &seq).unwrap();
        let back = loopshape::signal::load_yuv(&path, 32, 16, bit_depth).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(back.frames.len(), seq.frames.len());
        for (a, b) in back.frames.iter().zip(&seq.frames) {
            assert_eq!(a.samples(), b.samples(), "depth {bit_depth}");
        }
    }
}
