/**
 * Closed-form 1D magnetization curves, duplicated in this package so the
 * plotting layer never crosses the language boundary at render time. The
 * values are cross-checked against an oracle CSV produced by the simulation
 * toolkit to 1e-9 (see tests/exact.test.ts).
 */

export function isingNnExactM(beta: number, h: number, j0: number): number {
  const sh = Math.sinh(beta * h);
  return sh / Math.sqrt(sh * sh + Math.exp(-2 * beta * j0));
}

/**
 * Largest/smallest root of m = tanh(beta (j0 m + h)) on [-1, 1] by grid
 * bracketing plus bisection to 1e-12.
 */
export function curieWeissM(
  beta: number,
  h: number,
  j0: number,
  branch: "upper" | "lower",
): number {
  const f = (m: number) => Math.tanh(beta * (j0 * m + h)) - m;
  const nGrid = 4000;
  const roots: number[] = [];
  let prev = f(-1);
  for (let i = 1; i <= nGrid; i++) {
    const x0 = -1 + ((i - 1) * 2) / nGrid;
    const x1 = -1 + (i * 2) / nGrid;
    const cur = f(x1);
    if (prev === 0) roots.push(x0);
    if (prev * cur < 0) {
      let lo = x0;
      let hi = x1;
      for (let it = 0; it < 100 && hi - lo > 1e-13; it++) {
        const mid = 0.5 * (lo + hi);
        if (f(lo) * f(mid) <= 0) hi = mid;
        else lo = mid;
      }
      roots.push(0.5 * (lo + hi));
    }
    prev = cur;
  }
  if (f(1) === 0) roots.push(1);
  if (roots.length === 0) {
    throw new Error("no mean-field root bracketed");
  }
  return branch === "upper" ? Math.max(...roots) : Math.min(...roots);
}

/** Least-squares slope and intercept of y against x. */
export function fitLine(
  x: number[],
  y: number[],
): { slope: number; intercept: number } {
  const n = x.length;
  const mx = x.reduce((a, b) => a + b, 0) / n;
  const my = y.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}
