#pragma once

// Frozen reference values for the expected number of returns to the origin
// of the simple random walk on Z^d, E[R] = G_d(0) - 1 with the lattice
// Green function G_d(0) = integral_0^inf (e^{-t/d} I_0(t/d))^d dt. Computed
// once with 30-digit quadrature (mpmath) and recorded here; the Monte Carlo
// walks are tested against them, never the other way around.

namespace fixtures {

struct GreenValue {
    int d;
    double expected_returns;  // E[R(Z^d)]
    double return_prob;       // p = E[R] / (1 + E[R])
};

inline constexpr GreenValue kReturns[] = {
    {3, 0.516386059151978, 0.340537329550999},
    {4, 0.239467121848284, 0.193207542309714},
    {5, 0.156308124839755, 0.135178242134979},
    {6, 0.116963373227286, 0.104715495628822},
    {7, 0.093906315587787, 0.085844934113379},
    {8, 0.078647012016871, 0.072912196110861},
    {9, 0.067746086381364, 0.063447606399586},
    {10, 0.059543747888323, 0.056197535974745},
};

inline double expected_returns(int d) {
    for (const auto& g : kReturns)
        if (g.d == d) return g.expected_returns;
    return -1.0;
}

// Upper 0.001 quantiles of the chi-square distribution, df = 2, 4, 6:
// goodness-of-fit over the 2d+1 instruction categories at d = 1, 2, 3.
inline constexpr double kChi2Crit999[] = {13.8155, 18.4668, 22.4577};

}  // namespace fixtures
