#pragma once

// Reference estimates from the full-scale application of this library to the
// Japanese linked input-output tables (385 sectors, two linked periods).
// They are recorded here for comparison and for smoke-checking ports of the
// library against the original runs; none of the algorithms read them.

namespace cascade_ge::reference {

inline constexpr int kSectors = 385;

// Aggregate price fluctuation moments under iid sectoral productivity noise
// (sigma = 0.10 per year at an hourly horizon, 300 draws), reported as the
// difference of each economy against the Cobb-Douglas benchmark.  Mean and
// standard deviation are in parts per million of the log price level;
// skewness and excess kurtosis are dimensionless.
struct MomentRow {
  double mean_ppm;
  double sd_ppm;
  double skewness;
  double excess_kurtosis;
};

inline constexpr MomentRow kSimpleMinusCd{12.552, 244.697, -0.076, -0.545};
inline constexpr MomentRow kLeontiefMinusCd{-0.768, 0.149, -0.745, 0.393};
inline constexpr MomentRow kCcesMinusCd{-1.006, 1.783, 0.642, 4.077};

// Household CES curvature, estimated by weighted two-stage least squares on
// the 268 commodities with positive consumption in both periods.
inline constexpr double kLambdaHat = 1.09631;
inline constexpr double kLambdaSe = 0.35218;
inline constexpr double kInterceptHat = 0.00561;
inline constexpr double kInterceptSe = 0.00850;
inline constexpr double kFirstStageF = 119.57;  // F(2, 265)
inline constexpr double kSargan = 0.2917;
inline constexpr double kBasmann = 0.2887;
inline constexpr double kDurbin = 10.5032;
inline constexpr double kWuHausman = 10.8093;

// Capital-market calibration and the social rate of profit of standardized
// productivity increments.
inline constexpr double kEtaK = -0.80;
inline constexpr double kSropSimultaneous = 0.727;
inline constexpr double kSropSummed = 0.694;

}  // namespace cascade_ge::reference
