#pragma once

namespace nkc {

// Lower branch W_{-1} of the Lambert W function on [-1/e, 0); the returned
// w <= -1 satisfies w*exp(w) = y to relative residual below 1e-12.
double lambert_w_m1(double y);

}  // namespace nkc
