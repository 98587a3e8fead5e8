import init, { runTest, powerCurve, wienerQuantiles } from "./pkg/br_ar_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Draws line series [{xs, ys, color}] with shared axes.
function lines(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.xs), ys = series.flatMap((s) => s.ys).filter(Number.isFinite);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const y0 = opts.y0 ?? Math.min(...ys), y1 = opts.y1 ?? Math.max(...ys);
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad + ((y0 - y) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 24, h - pad + 14);
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.ys[i])) : ctx.moveTo(px(x), py(s.ys[i]))));
    ctx.stroke();
  }
  (opts.vlines || []).forEach(([x, color]) => {
    ctx.strokeStyle = color;
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(px(x), pad);
    ctx.lineTo(px(x), h - pad);
    ctx.stroke();
    ctx.setLineDash([]);
  });
  let ly = pad + 12;
  for (const s of series.filter((s) => s.label)) {
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, w - pad - 140, ly);
    ly += 14;
  }
}

function guard(out, f) {
  out.classList.remove("err");
  try {
    f();
  } catch (e) {
    out.textContent = String(e.message ?? e);
    out.classList.add("err");
  }
}

function runSingle() {
  guard($("t-out"), () => {
    const v = JSON.parse(runTest($("t-model").value, $("t-noise").value, num("t-n"), BigInt(num("t-seed")),
      $("t-kernel").value, num("t-h0")));
    lines($("t-density"), [
      { xs: v.x, ys: v.f_hat, color: "#c33", label: "kernel estimate" },
      { xs: v.x, ys: v.f0, color: "#36c", label: "N(0, 1)" },
    ], { y0: 0, vlines: [[-2, "#aaa"], [2, "#aaa"]] });
    lines($("t-series"), [{ xs: v.series.map((_, i) => i + 1), ys: v.series, color: "#555" }]);
    const r = v.report;
    $("t-out").textContent =
      `theta_hat = [${v.theta_hat.map((t) => t.toFixed(4)).join(", ")}]\n` +
      `h = ${r.br.h.toFixed(4)}  T = ${r.br.value.toFixed(4)}  mu = ${r.br.mu.toFixed(4)}  tau2 = ${r.br.tau2.toFixed(4)}\n` +
      `z = ${r.br.z.toFixed(3)}  p = ${r.p_value.toFixed(4)}  ${r.reject ? "reject" : "do not reject"} at 5%\n` +
      `KS: D = ${r.baseline_ks.d.toFixed(4)}  p = ${r.baseline_ks.p.toFixed(4)}`;
  });
}

function runPower() {
  guard($("p-out"), () => {
    const sweep = $("p-sweep").value;
    const grid = sweep === "mean"
      ? [0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1]
      : [0.2, 0.5, 0.75, 1, 1.25, 1.5, 2, 2.5, 3];
    const pts = JSON.parse(powerCurve($("p-model").value, num("p-n"), num("p-reps"), 1n, sweep, Float64Array.from(grid)));
    const xs = pts.map((p) => p.parameter);
    lines($("p-plot"), [
      { xs, ys: pts.map((p) => p.br), color: "#c33", label: "residual density test" },
      { xs, ys: pts.map((p) => p.ks), color: "#393", label: "Kolmogorov-Smirnov" },
      { xs, ys: xs.map(() => 0.05), color: "#aaa" },
    ], { y0: 0, y1: 1 });
    $("p-out").textContent = pts.map((p) => `${p.parameter}\t${p.br.toFixed(3)} ± ${p.stderr.toFixed(3)}\tks ${p.ks.toFixed(3)}`).join("\n");
  });
}

function runWiener() {
  guard($("w-out"), () => {
    const w = JSON.parse(wienerQuantiles(num("w-reps"), num("w-steps"), BigInt(num("w-seed")), 60));
    const mids = w.counts.map((_, i) => (w.edges[i] + w.edges[i + 1]) / 2);
    lines($("w-plot"), [{ xs: mids, ys: w.counts, color: "#639" }], { y0: 0, vlines: [[w.q90, "#36c"], [w.q95, "#c33"]] });
    $("w-out").textContent = `q0.90 = ${w.q90.toFixed(4)}  q0.95 = ${w.q95.toFixed(4)}  q0.99 = ${w.q99.toFixed(4)}`;
  });
}

await init();
$("t-run").onclick = runSingle;
$("p-run").onclick = runPower;
$("w-run").onclick = runWiener;
runSingle();
