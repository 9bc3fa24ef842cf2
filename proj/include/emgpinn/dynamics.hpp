#pragma once

// Planar two-link rigid-body model of the upper limb: shoulder and elbow
// revolute joints moving in the sagittal plane, hand load as a point mass
// at the distal end of the forearm.
//
// Angle convention: q1 is the shoulder angle measured from the downward
// vertical (positive flexion), q2 is elbow flexion relative to the upper-arm
// axis. q = 0 means the arm hangs straight down.
//
// The I/C/G formulas are templated on the scalar type so the autodiff tape
// variables can flow through the same expressions used for plain doubles.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace emgpinn {

struct SegmentParams {
    double mass = 0.0;        // kg
    double length = 0.0;      // m
    double com_ratio = 0.5;   // fraction of length, proximal joint -> com
    double inertia_com = 0.0; // kg m^2 about transverse axis through com

    void validate() const {
        if (!(mass > 0.0)) throw std::invalid_argument("SegmentParams: mass must be > 0");
        if (!(length > 0.0)) throw std::invalid_argument("SegmentParams: length must be > 0");
        if (!(com_ratio > 0.0 && com_ratio <= 1.0))
            throw std::invalid_argument("SegmentParams: com_ratio must be in (0,1]");
        if (inertia_com < 0.0)
            throw std::invalid_argument("SegmentParams: inertia_com must be >= 0");
    }
};

struct LimbModel {
    SegmentParams upper_arm;
    SegmentParams forearm;
    double hand_load = 0.0; // kg, point mass at distal end of forearm
    double gravity = 9.81;  // m/s^2

    void validate() const {
        upper_arm.validate();
        forearm.validate();
        if (hand_load < 0.0) throw std::invalid_argument("LimbModel: hand_load must be >= 0");
        if (!(gravity > 0.0)) throw std::invalid_argument("LimbModel: gravity must be > 0");
    }

    LimbModel with_load(double load_kg) const {
        LimbModel m = *this;
        m.hand_load = load_kg;
        return m;
    }
};

template <typename T>
using Vec2 = std::array<T, 2>;

template <typename T>
using Mat22 = std::array<std::array<T, 2>, 2>;

struct JointState {
    Vec2<double> q{0.0, 0.0};   // rad
    Vec2<double> qd{0.0, 0.0};  // rad/s
    Vec2<double> qdd{0.0, 0.0}; // rad/s^2
};

struct Torque2 {
    Vec2<double> tau{0.0, 0.0}; // N m
};

struct SingularMassMatrix : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Constant coefficients of the equations of motion. The hand load is folded
// into the forearm as a point mass at distance l2 from the elbow.
struct DynCoeffs {
    double i1 = 0, i2 = 0; // segment inertias about their coms
    double m1lc1 = 0;      // m1 * lc1
    double m1lc1sq = 0;    // m1 * lc1^2
    double a2 = 0;         // m2*lc2^2 + mL*l2^2
    double b2 = 0;         // m2*lc2 + mL*l2, first moment of distal assembly
    double m2L = 0;        // m2 + mL
    double l1 = 0;
    double h = 0;          // l1 * b2, q2-coupling coefficient
    double g = 0;
};

inline DynCoeffs dyn_coeffs(const LimbModel& m) {
    const double lc1 = m.upper_arm.com_ratio * m.upper_arm.length;
    const double lc2 = m.forearm.com_ratio * m.forearm.length;
    const double l2 = m.forearm.length;
    DynCoeffs c;
    c.i1 = m.upper_arm.inertia_com;
    c.i2 = m.forearm.inertia_com;
    c.m1lc1 = m.upper_arm.mass * lc1;
    c.m1lc1sq = m.upper_arm.mass * lc1 * lc1;
    c.a2 = m.forearm.mass * lc2 * lc2 + m.hand_load * l2 * l2;
    c.b2 = m.forearm.mass * lc2 + m.hand_load * l2;
    c.m2L = m.forearm.mass + m.hand_load;
    c.l1 = m.upper_arm.length;
    c.h = c.l1 * c.b2;
    c.g = m.gravity;
    return c;
}

// I(q): symmetric, positive definite for any q.
template <typename T>
Mat22<T> mass_matrix_t(const DynCoeffs& c, const Vec2<T>& q) {
    using std::cos;
    T c2 = cos(q[1]);
    T m22 = c.i2 + c.a2 + (q[0] - q[0]); // promote to T even when a2 is double
    T m12 = m22 + c.h * c2;
    T m11 = m12 + c.h * c2 + c.i1 + c.m1lc1sq + c.m2L * c.l1 * c.l1;
    return Mat22<T>{{{m11, m12}, {m12, m22}}};
}

// C(q,qd)*qd combined as a force vector. Vanishes at qd = 0, quadratic in qd.
template <typename T>
Vec2<T> coriolis_vector_t(const DynCoeffs& c, const Vec2<T>& q, const Vec2<T>& qd) {
    using std::sin;
    T s2 = sin(q[1]);
    T c1v = -c.h * s2 * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]);
    T c2v = c.h * s2 * (qd[0] * qd[0]);
    return Vec2<T>{c1v, c2v};
}

// G(q): gradient of gravitational potential energy w.r.t. q.
template <typename T>
Vec2<T> gravity_vector_t(const DynCoeffs& c, const Vec2<T>& q) {
    using std::sin;
    T s1 = sin(q[0]);
    T s12 = sin(q[0] + q[1]);
    T g2 = c.g * c.b2 * s12;
    T g1 = c.g * (c.m1lc1 + c.m2L * c.l1) * s1 + g2;
    return Vec2<T>{g1, g2};
}

// tau = I(q) qdd + C(q,qd) + G(q)
template <typename T>
Vec2<T> inverse_dynamics_t(const DynCoeffs& c, const Vec2<T>& q, const Vec2<T>& qd,
                           const Vec2<T>& qdd) {
    Mat22<T> I = mass_matrix_t(c, q);
    Vec2<T> cor = coriolis_vector_t(c, q, qd);
    Vec2<T> grav = gravity_vector_t(c, q);
    return Vec2<T>{I[0][0] * qdd[0] + I[0][1] * qdd[1] + cor[0] + grav[0],
                   I[1][0] * qdd[0] + I[1][1] * qdd[1] + cor[1] + grav[1]};
}

// Plain-double entry points.

inline Mat22<double> mass_matrix(const LimbModel& m, const Vec2<double>& q) {
    m.validate();
    return mass_matrix_t(dyn_coeffs(m), q);
}

inline Vec2<double> coriolis_vector(const LimbModel& m, const Vec2<double>& q,
                                    const Vec2<double>& qd) {
    m.validate();
    return coriolis_vector_t(dyn_coeffs(m), q, qd);
}

inline Vec2<double> gravity_vector(const LimbModel& m, const Vec2<double>& q) {
    m.validate();
    return gravity_vector_t(dyn_coeffs(m), q);
}

inline Torque2 inverse_dynamics(const LimbModel& m, const JointState& s) {
    m.validate();
    return Torque2{inverse_dynamics_t(dyn_coeffs(m), s.q, s.qd, s.qdd)};
}

// Solves I(q) qdd = tau - C(q,qd) - G(q). Throws SingularMassMatrix when the
// 2x2 inertia matrix is numerically singular (condition estimate > 1e12).
inline Vec2<double> forward_dynamics(const LimbModel& m, const Vec2<double>& q,
                                     const Vec2<double>& qd, const Torque2& tau) {
    m.validate();
    const DynCoeffs c = dyn_coeffs(m);
    const Mat22<double> I = mass_matrix_t(c, q);
    const Vec2<double> cor = coriolis_vector_t(c, q, qd);
    const Vec2<double> grav = gravity_vector_t(c, q);
    const double det = I[0][0] * I[1][1] - I[0][1] * I[1][0];
    const double norm = std::abs(I[0][0]) + std::abs(I[0][1]) + std::abs(I[1][0]) +
                        std::abs(I[1][1]);
    if (!(std::abs(det) > 0.0) || norm * norm / std::abs(det) > 1e12)
        throw SingularMassMatrix("mass matrix numerically singular");
    const double r0 = tau.tau[0] - cor[0] - grav[0];
    const double r1 = tau.tau[1] - cor[1] - grav[1];
    return Vec2<double>{(I[1][1] * r0 - I[0][1] * r1) / det,
                        (-I[1][0] * r0 + I[0][0] * r1) / det};
}

// Kinetic energy 1/2 qd' I(q) qd, used by the energy-conservation checks.
inline double kinetic_energy(const LimbModel& m, const Vec2<double>& q,
                             const Vec2<double>& qd) {
    const Mat22<double> I = mass_matrix_t(dyn_coeffs(m), q);
    return 0.5 * (qd[0] * (I[0][0] * qd[0] + I[0][1] * qd[1]) +
                  qd[1] * (I[1][0] * qd[0] + I[1][1] * qd[1]));
}

// Gravitational potential energy under the hanging-arm convention.
inline double potential_energy(const LimbModel& m, const Vec2<double>& q) {
    const DynCoeffs c = dyn_coeffs(m);
    const double y1 = -std::cos(q[0]);
    const double y12 = -std::cos(q[0] + q[1]);
    return c.g * (c.m1lc1 * y1 + c.m2L * c.l1 * y1 + c.b2 * y12);
}

using TorqueFn = std::function<Torque2(double /*t*/, const JointState&)>;

// Fixed-step RK4 integration of the forward dynamics. Deterministic.
// Throws NonFinite if any state component exceeds 1e6 in magnitude.
inline std::vector<JointState> simulate(const LimbModel& m, const Vec2<double>& q0,
                                        const Vec2<double>& qd0, const TorqueFn& tau_fn,
                                        double dt, double duration) {
    if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be > 0");
    if (duration < dt) throw std::invalid_argument("simulate: duration must be >= dt");
    m.validate();

    struct Deriv {
        Vec2<double> dq, dqd;
    };
    auto f = [&](double t, const Vec2<double>& q, const Vec2<double>& qd) -> Deriv {
        JointState s{q, qd, {0, 0}};
        Torque2 tau = tau_fn(t, s);
        return Deriv{qd, forward_dynamics(m, q, qd, tau)};
    };

    const std::size_t n_steps = static_cast<std::size_t>(std::llround(duration / dt));
    std::vector<JointState> out;
    out.reserve(n_steps + 1);

    Vec2<double> q = q0, qd = qd0;
    double t = 0.0;
    auto record = [&](double tt) {
        JointState s{q, qd, forward_dynamics(m, q, qd, tau_fn(tt, JointState{q, qd, {0, 0}}))};
        out.push_back(s);
    };
    record(0.0);
    for (std::size_t i = 0; i < n_steps; ++i) {
        Deriv k1 = f(t, q, qd);
        auto adv = [&](const Deriv& k, double hdt) {
            Vec2<double> q2{q[0] + hdt * k.dq[0], q[1] + hdt * k.dq[1]};
            Vec2<double> qd2{qd[0] + hdt * k.dqd[0], qd[1] + hdt * k.dqd[1]};
            return std::make_pair(q2, qd2);
        };
        auto [qa, qda] = adv(k1, dt / 2);
        Deriv k2 = f(t + dt / 2, qa, qda);
        auto [qb, qdb] = adv(k2, dt / 2);
        Deriv k3 = f(t + dt / 2, qb, qdb);
        auto [qc, qdc] = adv(k3, dt);
        Deriv k4 = f(t + dt, qc, qdc);
        for (int j = 0; j < 2; ++j) {
            q[j] += dt / 6.0 * (k1.dq[j] + 2 * k2.dq[j] + 2 * k3.dq[j] + k4.dq[j]);
            qd[j] += dt / 6.0 * (k1.dqd[j] + 2 * k2.dqd[j] + 2 * k3.dqd[j] + k4.dqd[j]);
        }
        t += dt;
        for (int j = 0; j < 2; ++j) {
            if (!std::isfinite(q[j]) || !std::isfinite(qd[j]) || std::abs(q[j]) > 1e6 ||
                std::abs(qd[j]) > 1e6)
                throw NonFinite("simulate: state diverged");
        }
        record(t);
    }
    return out;
}

// --- Segment parameter estimation -----------------------------------------

struct InvalidAnthropometrics : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Anthropometrics {
    double height = 0;            // m
    double weight = 0;            // kg
    double upper_arm_length = 0;  // m, acromion-radiale
    double forearm_length = 0;    // m, radiale-styloid
    double arm_circumference = 0; // m
    double biceps_circumference = 0;
    double forearm_circumference = 0;
    double wrist_circumference = 0;
};

// Linear regression over anthropometric predictors for one segment's MOI:
// inertia_com = intercept + sum_i coeff_i * predictor_i. Also carries the
// mass fraction and com ratio for the segment. The coefficient values are
// config inputs with documented defaults.
struct SegmentRegression {
    double mass_fraction = 0;  // of body mass
    double com_ratio = 0.5;
    double moi_intercept = 0;  // kg m^2
    double c_height = 0, c_weight = 0, c_length = 0;
    double c_circumference = 0; // segment circumference predictor
};

struct RegressionCoeffs {
    SegmentRegression upper_arm{0.028, 0.436, 0.0, 0.0, 0.0002, 0.02, 0.0};
    SegmentRegression forearm{0.016, 0.430, 0.0, 0.0, 0.0001, 0.01, 0.0};
};

inline std::pair<SegmentParams, SegmentParams>
estimate_segment_params(const Anthropometrics& a, const RegressionCoeffs& rc) {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(a.height) || !positive(a.weight) || !positive(a.upper_arm_length) ||
        !positive(a.forearm_length) || !positive(a.arm_circumference) ||
        !positive(a.biceps_circumference) || !positive(a.forearm_circumference) ||
        !positive(a.wrist_circumference))
        throw InvalidAnthropometrics("estimate_segment_params: all measurements must be > 0");

    auto build = [&](const SegmentRegression& r, double length, double circ) {
        SegmentParams s;
        s.mass = r.mass_fraction * a.weight;
        s.length = length;
        s.com_ratio = r.com_ratio;
        double moi = r.moi_intercept + r.c_height * a.height + r.c_weight * a.weight +
                     r.c_length * length + r.c_circumference * circ;
        s.inertia_com = std::max(moi, 0.0);
        s.validate();
        return s;
    };
    SegmentParams ua = build(rc.upper_arm, a.upper_arm_length, a.arm_circumference);
    SegmentParams fa = build(rc.forearm, a.forearm_length, a.forearm_circumference);
    return {ua, fa};
}

} // namespace emgpinn
