#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "emgpinn/signals.hpp"

using namespace emgpinn;

namespace {

UniformSeries sine_series(double rate, double dur, std::vector<double> freqs,
                          double amp = 1.0) {
    const Eigen::Index n = static_cast<Eigen::Index>(rate * dur);
    UniformSeries s;
    s.rate = rate;
    s.values = Eigen::MatrixXd::Zero(1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        double v = 0.0;
        for (double f : freqs) v += amp * std::sin(2 * M_PI * f * t);
        s.values(0, i) = v;
    }
    return s;
}

// Steady-state amplitude of a filtered sinusoid, measured over the middle
// half of the record to avoid residual edge effects.
double measured_gain(const FilterSpec& spec, double rate, double f, bool zero_phase) {
    UniformSeries s = sine_series(rate, 8.0, {f});
    UniformSeries y = butterworth_filter(s, spec, zero_phase);
    const Eigen::Index n = y.samples();
    double peak = 0.0;
    for (Eigen::Index i = n / 4; i < 3 * n / 4; ++i)
        peak = std::max(peak, std::abs(y.values(0, i)));
    return peak;
}

} // namespace

TEST(FilterSpec, NyquistValidation) {
    EXPECT_THROW((FilterSpec{FilterKind::Lowpass, 600.0, 0.0, 4}.validate(1000.0)),
                 NyquistViolation);
    EXPECT_THROW((FilterSpec{FilterKind::Lowpass, 0.0, 0.0, 4}.validate(1000.0)),
                 NyquistViolation);
    EXPECT_THROW((FilterSpec{FilterKind::Bandpass, 100.0, 50.0, 4}.validate(1000.0)),
                 NyquistViolation);
    EXPECT_THROW((FilterSpec{FilterKind::Bandpass, 10.0, 550.0, 4}.validate(1000.0)),
                 NyquistViolation);
    EXPECT_NO_THROW((FilterSpec{FilterKind::Bandpass, 10.0, 450.0, 4}.validate(4000.0)));
    EXPECT_THROW((FilterSpec{FilterKind::Lowpass, 7.0, 0.0, 0}.validate(125.0)),
                 std::invalid_argument);
}

TEST(Butterworth, LowpassMagnitudeMatchesAnalyticOracle) {
    // Single-pass (causal) gain of the digital filter should track the
    // analog prototype away from Nyquist warping territory.
    const double rate = 4000.0;
    FilterSpec lp{FilterKind::Lowpass, 7.0, 0.0, 4};
    for (double f : {1.0, 3.5, 7.0, 14.0, 28.0}) {
        const double want = butterworth_magnitude(lp, f);
        const double got = measured_gain(lp, rate, f, false);
        if (want > 1e-4)
            EXPECT_NEAR(got, want, 0.05 * want) << "f=" << f;
        else
            EXPECT_LT(got, 1e-3) << "f=" << f;
    }
    // corner gain is exactly -3 dB for Butterworth
    EXPECT_NEAR(measured_gain(lp, rate, 7.0, false), std::pow(10, -3.0103 / 20.0), 0.02);
}

TEST(Butterworth, BandpassMagnitudeMatchesAnalyticOracle) {
    const double rate = 4000.0;
    FilterSpec bp{FilterKind::Bandpass, 10.0, 450.0, 4};
    const double f0 = std::sqrt(10.0 * 450.0);
    EXPECT_NEAR(measured_gain(bp, rate, f0, false), 1.0, 0.05);
    for (double f : {10.0, 50.0, 200.0, 450.0}) {
        const double want = butterworth_magnitude(bp, f);
        const double got = measured_gain(bp, rate, f, false);
        EXPECT_NEAR(got, want, 0.05 * std::max(want, 0.1)) << "f=" << f;
    }
    // well outside the band: at least 20 dB down at 2 Hz and at 1200 Hz
    EXPECT_LT(measured_gain(bp, rate, 2.0, false), 0.1);
    EXPECT_LT(measured_gain(bp, rate, 1200.0, false), 0.1);
}

TEST(Butterworth, ZeroPhaseDoublesAttenuationAndPreservesPhase) {
    const double rate = 1000.0;
    FilterSpec lp{FilterKind::Lowpass, 10.0, 0.0, 2};

    // Passband sine comes through with no time shift: correlate input and
    // zero-phase output, peak alignment at lag 0.
    UniformSeries s = sine_series(rate, 4.0, {2.0});
    UniformSeries y = butterworth_filter(s, lp, true);
    const Eigen::Index n = s.samples();
    double best = -1e9;
    int best_lag = -100;
    for (int lag = -20; lag <= 20; ++lag) {
        double acc = 0.0;
        for (Eigen::Index i = 100; i < n - 100; ++i)
            acc += s.values(0, i) * y.values(0, i + lag);
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    EXPECT_EQ(best_lag, 0);

    // Stopband attenuation is squared relative to single pass.
    const double single = measured_gain(lp, rate, 40.0, false);
    const double both = measured_gain(lp, rate, 40.0, true);
    EXPECT_NEAR(both, single * single, 0.2 * single * single);
}

TEST(Butterworth, DcPreservedByLowpass) {
    UniformSeries s;
    s.rate = 1000.0;
    s.values = Eigen::MatrixXd::Constant(2, 4000, 3.7);
    UniformSeries y = butterworth_filter(s, FilterSpec{FilterKind::Lowpass, 7.0, 0.0, 4});
    EXPECT_NEAR(y.values(0, 2000), 3.7, 1e-6);
    EXPECT_NEAR(y.values(1, 100), 3.7, 1e-4);
}

TEST(Rectify, AbsoluteValue) {
    UniformSeries s;
    s.rate = 100.0;
    s.values = (Eigen::MatrixXd(1, 4) << -1.0, 2.0, -3.0, 0.0).finished();
    UniformSeries y = rectify(s);
    EXPECT_DOUBLE_EQ(y.values(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(y.values(0, 2), 3.0);
}

TEST(MvcNormalize, ScalesPerChannelAndRejectsBadPeaks) {
    UniformSeries s;
    s.rate = 100.0;
    s.values = (Eigen::MatrixXd(2, 2) << 1.0, 2.0, 3.0, 4.0).finished();
    Eigen::VectorXd mvc(2);
    mvc << 2.0, 4.0;
    UniformSeries y = mvc_normalize(s, mvc);
    EXPECT_DOUBLE_EQ(y.values(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(y.values(1, 0), 0.75);

    mvc[1] = 0.0;
    EXPECT_THROW(mvc_normalize(s, mvc), NonPositiveMvc);
    EXPECT_THROW(mvc_normalize(s, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST(Envelope, TracksModulationOfSyntheticEmg) {
    // Carrier noise at EMG frequencies, amplitude-modulated by a slow bump.
    const double rate = 4000.0;
    const Eigen::Index n = 16000;
    std::mt19937_64 rng(77);
    std::normal_distribution<double> gauss(0.0, 1.0);
    UniformSeries raw;
    raw.rate = rate;
    raw.values.resize(1, n);
    std::vector<double> mod(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        const double m = 0.2 + 0.8 * std::exp(-std::pow((t - 2.0) / 0.5, 2));
        mod[static_cast<std::size_t>(i)] = m;
        raw.values(0, i) = m * gauss(rng) * std::sin(2 * M_PI * 120.0 * t + gauss(rng));
    }
    UniformSeries env = emg_envelope(raw, Eigen::VectorXd::Ones(1));
    // envelope tracks the modulation profile closely
    Eigen::Index peak_i = 0;
    env.values.row(0).maxCoeff(&peak_i);
    EXPECT_NEAR(static_cast<double>(peak_i) / rate, 2.0, 0.3);
    double se = 0, sm = 0, see = 0, smm = 0, sem = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = env.values(0, i), m = mod[static_cast<std::size_t>(i)];
        se += e;
        sm += m;
        see += e * e;
        smm += m * m;
        sem += e * m;
    }
    const double nn = static_cast<double>(n);
    const double corr = (sem - se * sm / nn) /
                        std::sqrt((see - se * se / nn) * (smm - sm * sm / nn));
    EXPECT_GT(corr, 0.9);
    // and the contrast between peak and tail matches the modulation contrast
    const double tail = env.values(0, n - 2000);
    EXPECT_GT(env.values(0, peak_i) / tail, 2.0);
}

TEST(GaussianSmooth, PreservesConstantsAndReducesNoiseVariance) {
    UniformSeries s;
    s.rate = 125.0;
    s.values = Eigen::MatrixXd::Constant(1, 200, 1.25);
    UniformSeries y = gaussian_smooth(s, 10.0, 6);
    for (Eigen::Index i = 0; i < 200; ++i) EXPECT_NEAR(y.values(0, i), 1.25, 1e-12);

    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss(0.0, 1.0);
    UniformSeries noise;
    noise.rate = 125.0;
    noise.values.resize(1, 2000);
    for (Eigen::Index i = 0; i < 2000; ++i) noise.values(0, i) = gauss(rng);
    UniformSeries sm = gaussian_smooth(noise, 2.0, 6);
    const double var_in = noise.values.row(0).squaredNorm() / 2000;
    const double var_out = sm.values.row(0).squaredNorm() / 2000;
    EXPECT_LT(var_out, 0.3 * var_in);

    EXPECT_THROW(gaussian_smooth(s, 0.0, 6), std::invalid_argument);
    EXPECT_THROW(gaussian_smooth(s, 1.0, 0), std::invalid_argument);
}

TEST(CentralDifference, ExactOnPolynomials) {
    // second-order stencils are exact on quadratics for d/dt and on
    // quadratics for d2/dt2 as well
    const double rate = 50.0;
    const Eigen::Index n = 100;
    UniformSeries s;
    s.rate = rate;
    s.values.resize(1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        s.values(0, i) = 3.0 * t * t - 2.0 * t + 0.5;
    }
    UniformSeries d1 = central_difference(s, 1);
    UniformSeries d2 = central_difference(s, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        EXPECT_NEAR(d1.values(0, i), 6.0 * t - 2.0, 1e-8) << i;
        EXPECT_NEAR(d2.values(0, i), 6.0, 1e-6) << i;
    }
    EXPECT_THROW(central_difference(s, 3), std::invalid_argument);
    UniformSeries tiny;
    tiny.rate = rate;
    tiny.values = Eigen::MatrixXd::Zero(1, 2);
    EXPECT_THROW(central_difference(tiny, 1), TooShort);
}

TEST(CentralDifference, SineDerivativeSecondOrderAccurate) {
    auto max_err = [](double rate) {
        const Eigen::Index n = static_cast<Eigen::Index>(rate);
        UniformSeries s;
        s.rate = rate;
        s.values.resize(1, n);
        for (Eigen::Index i = 0; i < n; ++i)
            s.values(0, i) = std::sin(2 * M_PI * static_cast<double>(i) / rate);
        UniformSeries d = central_difference(s, 1);
        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / rate;
            err = std::max(err, std::abs(d.values(0, i) - 2 * M_PI * std::cos(2 * M_PI * t)));
        }
        return err;
    };
    // halving dt should cut the error by about 4x
    const double e1 = max_err(100.0), e2 = max_err(200.0);
    EXPECT_LT(e2, e1 / 3.0);
}

TEST(AlignAndResample, BlockAveragesOntoAngleClock) {
    // 1000 Hz envelope holding the value k on millisecond k, decimated onto
    // a 100 Hz clock: each output is the mean of the 10 samples around it.
    UniformSeries env;
    env.rate = 1000.0;
    env.values.resize(1, 1000);
    for (Eigen::Index i = 0; i < 1000; ++i) env.values(0, i) = static_cast<double>(i);
    UniformSeries ang;
    ang.rate = 100.0;
    ang.values = Eigen::MatrixXd::Zero(2, 100);
    for (Eigen::Index i = 0; i < 100; ++i) ang.values(0, i) = static_cast<double>(i);

    auto [env_lo, ang_lo] = align_and_resample(env, ang);
    EXPECT_DOUBLE_EQ(env_lo.rate, 100.0);
    EXPECT_EQ(env_lo.samples(), ang_lo.samples());
    // an interior window centered at t=0.50 covers samples 496..504 inclusive
    bool checked = false;
    for (Eigen::Index j = 0; j < ang_lo.samples(); ++j) {
        if (std::abs(ang_lo.values(0, j) - 50.0) < 1e-9) {
            EXPECT_NEAR(env_lo.values(0, j), 500.0, 1.0);
            checked = true;
        }
    }
    EXPECT_TRUE(checked);
}

TEST(AlignAndResample, DisjointSeriesThrow) {
    UniformSeries env;
    env.rate = 1000.0;
    env.t0 = 0.0;
    env.values = Eigen::MatrixXd::Zero(1, 100);
    UniformSeries ang;
    ang.rate = 100.0;
    ang.t0 = 10.0;
    ang.values = Eigen::MatrixXd::Zero(1, 50);
    EXPECT_THROW(align_and_resample(env, ang), NoOverlap);
}
