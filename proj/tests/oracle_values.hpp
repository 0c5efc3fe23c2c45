// Generated by tests/oracles/derive.py (mpmath, 50 digits). Do not edit.
#pragma once

namespace oracle {

struct Hyp { double a, b, c, x, value; };
inline constexpr Hyp hyp2f1[] = {
    {1, 1, 2, 0.5, 1.3862943611198906},
    {0.3, 1.7, 2.9, 0.9, 1.3216626785767169},
    {0.3, 1.7, 2.9, 0.2, 1.0387606773151912},
    {-2.5, 7.3, 1.1, 0.97, -1874.9726442128129},
    {10.5, -3.2, 4.1, 0.7, 0.021925843274606363},
    {-12.25, 8.5, 0.75, 0.45, -0.036322354299286808},
    {2.5, 3.5, 7.25, 0.999, 13.954153280467589},
    {0.5, -0.5, 1.5, 0.6, 0.8881880900008647},
};

struct LogGamma { double x, log_abs; int sign; };
inline constexpr LogGamma log_gamma[] = {
    {1, 0.0, 1},
    {0.5, 0.57236494292470009, 1},
    {-0.5, 1.2655121234846454, -1},
    {-2.5, -0.056243716497674051, -1},
    {0.001, 6.9071788853838537, 1},
    {3.75, 1.4868155785934171, 1},
    {-7.3, -7.7791016298268524, 1},
    {171.3, 708.11494703899682, 1},
    {1e-7, 16.118095593236762, 1},
    {12.5, 18.734347511936446, 1},
};

struct G0 { double kappa, t, u, value, C0; };
inline constexpr G0 g0[] = {
    {4, -1, 1.0, 0.44199286845433527, 0.34630179662610517},
    {4, -1, 3.0, 0.68345102083857959, 0.34630179662610517},
    {4, 0, 3.0, 0.56418958354775629, 0.56418958354775629},
    {6, 0.5, 0.3, 0.51435272488366196, 0.5780455965303273},
    {6, 0.5, 1.5, 0.43254203791045934, 0.5780455965303273},
    {2, -3, 0.8, -0.012305104081464035, -0.020589929377489526},
    {0.5, -4, 1.2, -0.48289151970589006, -0.30833417155821641},
    {8, 1, 0.05, 0.5019242554125223, 0.60028645488394768},
    {4, -7, 1.9, 0.12154905100265985, -0.029346362023583858},
    {2.6666666666666665, -2, 0.25, 0.17872224283529254, 0.16863823733366603},
};

inline constexpr double k4_t1 = -6.0, k4_t2 = -2.5, k4_t3 = 1.5;
inline constexpr double k6_t2 = -3.25;
inline constexpr double k4_t1_beta0 = 2.0, k4_t1_beta1 = 2.0, k4_t1_b = 0.5;
inline constexpr double k6_beta0_t1 = 0.16204060378000892;
inline constexpr double k6_beta0_t05 = 0.03425088038277204;
inline constexpr double k4_beta0_tm2 = 0.3431457505076198;
inline constexpr double k4_C_at_t2 = 0.0;
inline constexpr double k4_s_t1 = 9.0;
inline constexpr double k4_nu_s9 = 6.0;
inline constexpr double log_gamma_m05 = 1.2655121234846454;

}  // namespace oracle
