#pragma once

#include <string>

#include "evofam/evofam.hpp"

namespace fixture {

using evofam::BetaProfile;
using evofam::CoefficientFamily;
using evofam::Polynomial;
using evofam::ScalarProfile;

inline CoefficientFamily family(ScalarProfile alpha, BetaProfile beta = BetaProfile::zero(), double horizon = 1.0) {
    CoefficientFamily cf;
    cf.alpha = std::move(alpha);
    cf.beta = std::move(beta);
    cf.horizon = horizon;
    return cf;
}

/// α = 1 + t/2
inline ScalarProfile ramp() { return ScalarProfile::affine(1.0, 0.5); }

/// β(t, ξ) = c·ξ
inline BetaProfile linear_xi(double c) { return BetaProfile::separable(ScalarProfile::constant(c), Polynomial({0.0, 1.0})); }

inline std::string alpha_json(const std::string& family, const std::string& params) {
    return R"({"family":")" + family + R"(","params":)" + params + "}";
}

inline std::string config_text(double horizon, int n, int m, const std::string& alpha,
                               const std::string& beta = R"({"family":"zero","params":{}})",
                               const std::string& extra = "") {
    char head[96];
    std::snprintf(head, sizeof head, R"({"T":%.17g,"N":%d,"M":%d,)", horizon, n, m);
    return std::string(head) + R"("alpha":)" + alpha + R"(,"beta":)" + beta + extra + "}";
}

inline const std::string constant_one = alpha_json("constant", R"({"c":1})");
inline const std::string ramp_alpha = alpha_json("affine", R"({"a":1,"b":0.5})");
inline const std::string beta_tenth_xi =
    R"({"family":"separable","params":{"g":{"family":"constant","params":{"c":0.1}},"p":[0,1]}})";
inline const std::string beta_xi =
    R"({"family":"separable","params":{"g":{"family":"constant","params":{"c":1}},"p":[0,1]}})";

}  // namespace fixture
