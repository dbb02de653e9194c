"""Arbitrary-precision reference for the checkpoint schedule.

Evaluates the defining formulas directly with mpmath at 200 digits: no
floor dropping shortcuts beyond ``log m' = (s_n + s_{n-1}) / 2``, no fused
log-domain tricks. Run as a script to print the frozen constants.
"""

import mpmath as mp

mp.mp.dps = 200


def s(n, th=None):
    return 2 * n * mp.log(mp.log(mp.sqrt(n)))


def t0(x, theta):
    return x / mp.log(mp.log(x)) ** theta


def log_mprime(n):
    return (s(n) + s(n - 1)) / 2


def prob_B(n):
    return mp.exp(mp.exp(s(n)) * mp.log1p(-mp.exp(-log_mprime(n))))


def prob_E(n):
    return 1 - mp.exp(mp.exp(s(n - 1)) * mp.log1p(-mp.exp(-log_mprime(n))))


def row(n, theta=mp.mpf(1) / 2):
    sig = s(n) - s(n - 1)
    return {
        "s": s(n),
        "sigma": sig,
        "pi": mp.exp(sig / 2),
        "pe_bound": mp.exp(-sig / 2),
        "gap_t": t0(s(n), theta) - t0(log_mprime(n), theta),
    }


if __name__ == "__main__":
    for n in (100,):
        for k, v in row(n).items():
            print(n, k, mp.nstr(v, 17))
        print(n, "PB", mp.nstr(prob_B(n), 17), "PE", mp.nstr(prob_E(n), 17))
    print("gap_t 10^4", mp.nstr(row(10**4)["gap_t"], 17))
    n = 10**6
    print("sigma - 2 loglog sqrt n at 1e6", mp.nstr(row(n)["sigma"] - 2 * mp.log(mp.log(mp.sqrt(n))), 17),
          "2/log n", mp.nstr(2 / mp.log(n), 17))
    print("pi / log sqrt n at 1e6", mp.nstr(row(n)["pi"] / mp.log(mp.sqrt(n)), 17))
    print("sum PB 100<n<=400", mp.nstr(mp.fsum(prob_B(k) for k in range(101, 401)), 17))
