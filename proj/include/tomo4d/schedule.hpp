#pragma once

#include <stdexcept>
#include <vector>

namespace tomo4d {

/// Acquisition timeline: one view angle per normalized time sample.
/// times[i] = i/(N-1), so t_0 = 0 and t_{N-1} = 1 exactly.
struct ScanSchedule {
    std::vector<double> angles_deg;
    std::vector<double> times;
    double arc_start_deg = 0.0;
    double arc_stop_deg = 0.0;
    bool endpoint_inclusive = true;

    int n_proj() const { return static_cast<int>(angles_deg.size()); }

    void validate() const {
        if (angles_deg.size() != times.size() || angles_deg.size() < 2)
            throw std::invalid_argument("ScanSchedule: need >= 2 matched angles/times");
        if (times.front() != 0.0 || times.back() != 1.0)
            throw std::invalid_argument("ScanSchedule: times must span [0,1]");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw std::invalid_argument("ScanSchedule: times not strictly increasing");
    }
};

/// Angles linearly spaced over [start, stop]; with endpoint_inclusive both
/// ends are sampled (step = span/(N-1)), otherwise the stop angle is left
/// out (step = span/N, a [start, stop) sweep).
inline ScanSchedule make_schedule(double start_deg, double stop_deg, int n_proj,
                                  bool endpoint_inclusive = true) {
    if (n_proj < 2) throw std::invalid_argument("make_schedule: n_proj must be >= 2");
    if (stop_deg == start_deg) throw std::invalid_argument("make_schedule: empty arc");
    ScanSchedule s;
    s.arc_start_deg = start_deg;
    s.arc_stop_deg = stop_deg;
    s.endpoint_inclusive = endpoint_inclusive;
    const double denom = endpoint_inclusive ? n_proj - 1 : n_proj;
    const double step = (stop_deg - start_deg) / denom;
    s.angles_deg.resize(n_proj);
    s.times.resize(n_proj);
    for (int i = 0; i < n_proj; ++i) {
        s.angles_deg[i] = start_deg + step * i;
        s.times[i] = static_cast<double>(i) / (n_proj - 1);
    }
    return s;
}

} // namespace tomo4d
