#pragma once

// EMG envelope extraction and joint-angle conditioning: Butterworth
// band-pass / low-pass (optionally zero-phase), rectification, MVC
// normalization, Gaussian smoothing, central differences and decimation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace emgpinn {

struct NyquistViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NonPositiveMvc : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct TooShort : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NoOverlap : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Uniformly sampled multichannel series; rows are channels, cols are samples.
struct UniformSeries {
    double rate = 0.0; // Hz
    double t0 = 0.0;   // s
    Eigen::MatrixXd values;

    void validate() const {
        if (!(rate > 0.0)) throw std::invalid_argument("UniformSeries: rate must be > 0");
        if (!values.allFinite())
            throw std::invalid_argument("UniformSeries: non-finite sample");
    }
    Eigen::Index channels() const { return values.rows(); }
    Eigen::Index samples() const { return values.cols(); }
    double time_at(Eigen::Index i) const { return t0 + static_cast<double>(i) / rate; }
};

enum class FilterKind { Lowpass, Bandpass };

struct FilterSpec {
    FilterKind kind = FilterKind::Lowpass;
    double low_hz = 0.0;  // lower corner (bandpass) or cutoff (lowpass)
    double high_hz = 0.0; // upper corner, bandpass only
    int order = 4;

    void validate(double rate) const {
        if (order < 1) throw std::invalid_argument("FilterSpec: order must be >= 1");
        const double nyq = rate / 2.0;
        if (kind == FilterKind::Lowpass) {
            if (!(low_hz > 0.0 && low_hz < nyq))
                throw NyquistViolation("lowpass cutoff must be in (0, rate/2)");
        } else {
            if (!(low_hz > 0.0 && high_hz > low_hz && high_hz < nyq))
                throw NyquistViolation("bandpass corners must satisfy 0 < low < high < rate/2");
        }
    }
};

namespace detail {

struct Biquad {
    // H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

using cplx = std::complex<double>;

inline std::vector<Biquad> design_butterworth(const FilterSpec& spec, double rate) {
    spec.validate(rate);
    const int n = spec.order;
    const double fs2 = 2.0 * rate;

    // Analog prototype poles on the left-half unit circle.
    std::vector<cplx> proto;
    for (int k = 1; k <= n; ++k) {
        double theta = M_PI * (2.0 * k + n - 1.0) / (2.0 * n);
        proto.emplace_back(std::cos(theta), std::sin(theta));
    }

    // Frequency-warped analog poles, then bilinear transform to z.
    std::vector<cplx> zpoles;
    int n_zeros_at_plus1 = 0; // bandpass puts zeros at z=+1
    if (spec.kind == FilterKind::Lowpass) {
        const double wc = fs2 * std::tan(M_PI * spec.low_hz / rate);
        for (cplx p : proto) {
            cplx s = p * wc;
            zpoles.push_back((fs2 + s) / (fs2 - s));
        }
    } else {
        const double wl = fs2 * std::tan(M_PI * spec.low_hz / rate);
        const double wh = fs2 * std::tan(M_PI * spec.high_hz / rate);
        const double w0sq = wl * wh;
        const double bw = wh - wl;
        for (cplx p : proto) {
            cplx pb = p * bw;
            cplx d = std::sqrt(pb * pb - 4.0 * w0sq);
            for (cplx s : {(pb + d) / 2.0, (pb - d) / 2.0})
                zpoles.push_back((fs2 + s) / (fs2 - s));
        }
        n_zeros_at_plus1 = n;
    }

    // Pair conjugate poles into second-order sections.
    std::vector<cplx> pending = zpoles;
    std::vector<Biquad> sections;
    std::vector<cplx> reals;
    const double tol = 1e-10;
    for (const cplx& p : pending) {
        if (std::abs(p.imag()) < tol) {
            reals.push_back(p);
        } else if (p.imag() > 0) {
            Biquad s;
            s.a1 = -2.0 * p.real();
            s.a2 = std::norm(p);
            sections.push_back(s);
        }
    }
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
        Biquad s;
        s.a1 = -(reals[i].real() + reals[i + 1].real());
        s.a2 = reals[i].real() * reals[i + 1].real();
        sections.push_back(s);
    }
    if (reals.size() % 2 == 1) {
        Biquad s;
        s.a1 = -reals.back().real();
        s.a2 = 0.0;
        sections.push_back(s);
    }

    // Distribute zeros: lowpass has 2 per section at z=-1; bandpass one at
    // z=+1 and one at z=-1 per section.
    int plus_left = n_zeros_at_plus1;
    for (Biquad& s : sections) {
        if (spec.kind == FilterKind::Lowpass) {
            s.b0 = 1;
            s.b1 = 2;
            s.b2 = 1;
        } else {
            if (plus_left >= 1) {
                s.b0 = 1;
                s.b1 = 0;
                s.b2 = -1; // (z-1)(z+1)
                --plus_left;
            } else {
                s.b0 = 1;
                s.b1 = 2;
                s.b2 = 1;
            }
        }
    }

    // Normalize gain to 1 at the reference frequency (DC for lowpass,
    // geometric center for bandpass).
    double w_ref;
    if (spec.kind == FilterKind::Lowpass) {
        w_ref = 0.0;
    } else {
        const double wl = fs2 * std::tan(M_PI * spec.low_hz / rate);
        const double wh = fs2 * std::tan(M_PI * spec.high_hz / rate);
        w_ref = 2.0 * std::atan(std::sqrt(wl * wh) / fs2);
    }
    cplx z = std::exp(cplx(0.0, w_ref));
    cplx h(1.0, 0.0);
    for (const Biquad& s : sections) {
        cplx zi = 1.0 / z;
        h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
    }
    const double gain = 1.0 / std::abs(h);
    if (!sections.empty()) {
        // spread gain evenly to keep intermediate magnitudes tame
        const double per = std::pow(gain, 1.0 / static_cast<double>(sections.size()));
        for (Biquad& s : sections) {
            s.b0 *= per;
            s.b1 *= per;
            s.b2 *= per;
        }
    }
    return sections;
}

inline void biquad_filter_inplace(const Biquad& s, Eigen::Ref<Eigen::VectorXd> x) {
    // State starts at the step steady state for x[0] so a constant input
    // passes through without a start-up transient.
    double w1 = 0.0, w2 = 0.0; // direct form II state
    const double den = 1.0 + s.a1 + s.a2;
    if (x.size() > 0 && std::abs(den) > 1e-12) w1 = w2 = x[0] / den;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double w0 = x[i] - s.a1 * w1 - s.a2 * w2;
        x[i] = s.b0 * w0 + s.b1 * w1 + s.b2 * w2;
        w2 = w1;
        w1 = w0;
    }
}

inline Eigen::VectorXd sos_filter(const std::vector<Biquad>& sos, Eigen::VectorXd x) {
    for (const Biquad& s : sos) biquad_filter_inplace(s, x);
    return x;
}

// Odd-symmetric edge extension, as used for transient suppression in
// forward-backward filtering.
inline Eigen::VectorXd odd_extend(const Eigen::VectorXd& x, Eigen::Index pad) {
    Eigen::VectorXd y(x.size() + 2 * pad);
    for (Eigen::Index i = 0; i < pad; ++i) y[i] = 2.0 * x[0] - x[pad - i];
    y.segment(pad, x.size()) = x;
    for (Eigen::Index i = 0; i < pad; ++i)
        y[pad + x.size() + i] = 2.0 * x[x.size() - 1] - x[x.size() - 2 - i];
    return y;
}

} // namespace detail

// Analytic squared-magnitude-free oracle helper: the ideal Butterworth
// magnitude response of the analog prototype, used by tests as the
// independent reference. Lowpass: 1/sqrt(1+(f/fc)^2n). Bandpass uses the
// standard lowpass-to-bandpass substitution.
inline double butterworth_magnitude(const FilterSpec& spec, double f_hz) {
    const double n2 = 2.0 * spec.order;
    if (spec.kind == FilterKind::Lowpass)
        return 1.0 / std::sqrt(1.0 + std::pow(f_hz / spec.low_hz, n2));
    const double f0 = std::sqrt(spec.low_hz * spec.high_hz);
    const double bw = spec.high_hz - spec.low_hz;
    const double u = (f_hz * f_hz - f0 * f0) / (f_hz * bw);
    return 1.0 / std::sqrt(1.0 + std::pow(std::abs(u), n2));
}

inline UniformSeries butterworth_filter(const UniformSeries& x, const FilterSpec& spec,
                                        bool zero_phase = true) {
    x.validate();
    spec.validate(x.rate);
    const auto sos = detail::design_butterworth(spec, x.rate);

    // Pad generously relative to the slowest corner so the forward-backward
    // transients stay outside the kept region.
    const Eigen::Index n = x.samples();
    Eigen::Index pad = static_cast<Eigen::Index>(std::ceil(3.0 * x.rate / spec.low_hz));
    pad = std::min(pad, n - 1);
    pad = std::max<Eigen::Index>(pad, std::min<Eigen::Index>(n - 1, 12));

    UniformSeries out = x;
    for (Eigen::Index ch = 0; ch < x.channels(); ++ch) {
        Eigen::VectorXd v = x.values.row(ch).transpose();
        if (zero_phase && n > 1) {
            Eigen::VectorXd ext = detail::odd_extend(v, pad);
            ext = detail::sos_filter(sos, std::move(ext));
            ext.reverseInPlace();
            ext = detail::sos_filter(sos, std::move(ext));
            ext.reverseInPlace();
            v = ext.segment(pad, n);
        } else {
            v = detail::sos_filter(sos, std::move(v));
        }
        out.values.row(ch) = v.transpose();
    }
    return out;
}

inline UniformSeries rectify(const UniformSeries& x) {
    UniformSeries out = x;
    out.values = x.values.cwiseAbs();
    return out;
}

inline UniformSeries mvc_normalize(const UniformSeries& env, const Eigen::VectorXd& mvc_peak) {
    if (mvc_peak.size() != env.channels())
        throw std::invalid_argument("mvc_normalize: channel count mismatch");
    if ((mvc_peak.array() <= 0.0).any())
        throw NonPositiveMvc("mvc_normalize: mvc peaks must be > 0");
    UniformSeries out = env;
    out.values = env.values.array().colwise() / mvc_peak.array();
    return out;
}

struct EnvelopeSpec {
    FilterSpec bandpass{FilterKind::Bandpass, 10.0, 450.0, 4};
    FilterSpec lowpass{FilterKind::Lowpass, 7.0, 0.0, 4};
    bool zero_phase = true;
};

// band-pass -> full-wave rectify -> low-pass -> MVC normalize.
inline UniformSeries emg_envelope(const UniformSeries& raw, const Eigen::VectorXd& mvc_peak,
                                  const EnvelopeSpec& spec = {}) {
    UniformSeries env = butterworth_filter(raw, spec.bandpass, spec.zero_phase);
    env = rectify(env);
    env = butterworth_filter(env, spec.lowpass, spec.zero_phase);
    return mvc_normalize(env, mvc_peak);
}

// Truncated discrete Gaussian, renormalized to sum 1; reflection padding.
inline UniformSeries gaussian_smooth(const UniformSeries& x, double sigma_samples,
                                     int half_width_samples) {
    x.validate();
    if (half_width_samples < 1)
        throw std::invalid_argument("gaussian_smooth: half width must be >= 1");
    if (!(sigma_samples > 0.0))
        throw std::invalid_argument("gaussian_smooth: sigma must be > 0");

    const int hw = half_width_samples;
    Eigen::VectorXd kernel(2 * hw + 1);
    for (int k = -hw; k <= hw; ++k)
        kernel[k + hw] = std::exp(-0.5 * (k * k) / (sigma_samples * sigma_samples));
    kernel /= kernel.sum();

    const Eigen::Index n = x.samples();
    auto reflect = [&](Eigen::Index i) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * (n - 1) - i;
        }
        return i;
    };
    UniformSeries out = x;
    for (Eigen::Index ch = 0; ch < x.channels(); ++ch) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = -hw; k <= hw; ++k)
                acc += kernel[k + hw] * x.values(ch, reflect(i + k));
            out.values(ch, i) = acc;
        }
    }
    return out;
}

// Central differences; interior points are second-order, endpoints use
// one-sided second-order stencils.
inline UniformSeries central_difference(const UniformSeries& x, int order) {
    x.validate();
    const Eigen::Index n = x.samples();
    if (n < 3) throw TooShort("central_difference: need at least 3 samples");
    if (order != 1 && order != 2)
        throw std::invalid_argument("central_difference: order must be 1 or 2");
    const double dt = 1.0 / x.rate;

    UniformSeries out = x;
    for (Eigen::Index ch = 0; ch < x.channels(); ++ch) {
        const auto v = x.values.row(ch);
        auto o = out.values.row(ch);
        if (order == 1) {
            for (Eigen::Index i = 1; i + 1 < n; ++i) o[i] = (v[i + 1] - v[i - 1]) / (2 * dt);
            o[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dt);
            o[n - 1] = (3 * v[n - 1] - 4 * v[n - 2] + v[n - 3]) / (2 * dt);
        } else {
            for (Eigen::Index i = 1; i + 1 < n; ++i)
                o[i] = (v[i + 1] - 2 * v[i] + v[i - 1]) / (dt * dt);
            if (n >= 4) {
                o[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / (dt * dt);
                o[n - 1] = (2 * v[n - 1] - 5 * v[n - 2] + 4 * v[n - 3] - v[n - 4]) / (dt * dt);
            } else {
                o[0] = o[1];
                o[n - 1] = o[1];
            }
        }
    }
    return out;
}

// Decimates a high-rate envelope onto a low-rate angle clock by averaging
// over each angle-sample period; samples outside the overlap are dropped.
// Returns (envelope at angle rate, angles cropped to the same rows).
inline std::pair<UniformSeries, UniformSeries>
align_and_resample(const UniformSeries& emg_env, const UniformSeries& angles) {
    emg_env.validate();
    angles.validate();
    const double period = 1.0 / angles.rate;
    const double emg_t_end = emg_env.time_at(emg_env.samples() - 1);
    const double ang_t_end = angles.time_at(angles.samples() - 1);
    if (emg_env.t0 > ang_t_end || angles.t0 > emg_t_end)
        throw NoOverlap("align_and_resample: series do not overlap in time");

    std::vector<Eigen::Index> kept;
    std::vector<Eigen::VectorXd> rows;
    for (Eigen::Index k = 0; k < angles.samples(); ++k) {
        const double tc = angles.time_at(k);
        const double lo = tc - period / 2.0, hi = tc + period / 2.0;
        Eigen::Index i0 = static_cast<Eigen::Index>(std::ceil((lo - emg_env.t0) * emg_env.rate - 1e-9));
        Eigen::Index i1 = static_cast<Eigen::Index>(std::floor((hi - emg_env.t0) * emg_env.rate - 1e-9));
        i0 = std::max<Eigen::Index>(i0, 0);
        i1 = std::min(i1, emg_env.samples() - 1);
        if (i0 > i1) continue;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(emg_env.channels());
        for (Eigen::Index i = i0; i <= i1; ++i) mean += emg_env.values.col(i);
        mean /= static_cast<double>(i1 - i0 + 1);
        kept.push_back(k);
        rows.push_back(std::move(mean));
    }
    if (kept.empty()) throw NoOverlap("align_and_resample: no overlapping samples");

    UniformSeries env_out;
    env_out.rate = angles.rate;
    env_out.t0 = angles.time_at(kept.front());
    env_out.values.resize(emg_env.channels(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) env_out.values.col(j) = rows[j];

    UniformSeries ang_out;
    ang_out.rate = angles.rate;
    ang_out.t0 = env_out.t0;
    ang_out.values.resize(angles.channels(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j)
        ang_out.values.col(j) = angles.values.col(kept[j]);
    return {env_out, ang_out};
}

} // namespace emgpinn
