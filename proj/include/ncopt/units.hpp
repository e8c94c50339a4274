#ifndef NCOPT_UNITS_HPP
#define NCOPT_UNITS_HPP

namespace ncopt {

/// Avogadro constant [1/mol], 2019 SI exact value.
inline constexpr double kAvogadro = 6.02214076e23;

inline constexpr double kSecondsPerHour = 3600.0;

/// Litres per cubic metre.
inline constexpr double kLitrePerM3 = 1e3;

} // namespace ncopt

#endif
