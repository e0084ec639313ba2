#pragma once

#include <cmath>
#include <utility>
#include <vector>

namespace fjup::testutil {

struct MeanSe {
    double mean;
    double se;
};

inline MeanSe mean_se(const std::vector<double>& samples) {
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= samples.size();
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= (samples.size() - 1);
    return {mean, std::sqrt(var / samples.size())};
}

// paired-difference mean and standard error (common-random-number margins)
inline MeanSe paired_diff(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return mean_se(d);
}

}  // namespace fjup::testutil
