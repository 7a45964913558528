#pragma once

#include "ncts/numerics.hpp"

namespace ncts {

Vec saturate(const Vec& u, const Vec& limits);
Vec deadzone(const Vec& u, const Vec& limits);

struct TriggerDecision {
    bool released = false;
    double error_norm_sq = 0.0; // e'We
    double threshold = 0.0;     // mu x'Wx
};

// Release when e'We > mu x'Wx. Ties do not release.
TriggerDecision event_release(const Vec& e_k, const Vec& x_sampled, const Mat& W, double mu);

enum class InputSource { time_path, event_path, attack_path };
const char* to_string(InputSource s);

struct ControllerInputSample {
    Vec value;
    InputSource source = InputSource::time_path;
    int alpha = 1;
    int beta = 0;
};

ControllerInputSample primary_input(int alpha, int beta, const Vec& x_time_path, const Vec& x_event_path,
                                    const Vec& e_k, const Vec& f_delayed);

} // namespace ncts
