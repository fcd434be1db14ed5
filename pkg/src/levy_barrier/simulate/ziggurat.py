"""Tables for the 256-layer ziggurat normal sampler (Marsaglia & Tsang).

Both simulation backends read these arrays, so the compiled and the pure
Python sampler accept and reject exactly the same candidates.
"""
import math

import numpy as np

ZIG_R = 3.6541528853610088
ZIG_INV_R = 1.0 / ZIG_R
_V = 4.92867323399e-3
_M1 = 2.0 ** 52


def _tables():
    ki = np.zeros(256, dtype=np.uint64)
    wi = np.zeros(256, dtype=np.float64)
    fi = np.zeros(256, dtype=np.float64)
    dn = tn = ZIG_R
    q = _V / math.exp(-0.5 * dn * dn)
    ki[0] = int((dn / q) * _M1)
    ki[1] = 0
    wi[0] = q / _M1
    wi[255] = dn / _M1
    fi[0] = 1.0
    fi[255] = math.exp(-0.5 * dn * dn)
    for i in range(254, 0, -1):
        dn = math.sqrt(-2.0 * math.log(_V / dn + math.exp(-0.5 * dn * dn)))
        ki[i + 1] = int((dn / tn) * _M1)
        tn = dn
        fi[i] = math.exp(-0.5 * dn * dn)
        wi[i] = dn / _M1
    return ki, wi, fi


KI, WI, FI = _tables()
