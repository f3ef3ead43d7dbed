import init, { fringeScan, umziCascade, spinPhases } from "./pkg/timebin_web.js";

const $ = (id) => document.getElementById(id);
const nums = (text) => text.split(",").map((s) => Number(s.trim())).filter((x) => !Number.isNaN(x));
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys, opts.yMin ?? Infinity), Math.max(...ys, opts.yMax ?? -Infinity)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad + ((y0 - y) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 16);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - pad + 16);

  series.forEach((s, i) => {
    ctx.strokeStyle = ctx.fillStyle = s.color ?? COLORS[i % COLORS.length];
    if (s.bars) {
      const bw = (w - 2 * pad) / s.x.length * 0.6;
      s.x.forEach((x, k) => {
        const top = py(s.y[k]);
        ctx.fillRect(px(x) - bw / 2, top, bw, py(y0) - top);
      });
    } else if (s.points) {
      s.x.forEach((x, k) => {
        ctx.beginPath();
        ctx.arc(px(x), py(s.y[k]), 3, 0, 2 * Math.PI);
        ctx.fill();
      });
    } else {
      ctx.beginPath();
      s.x.forEach((x, k) => (k ? ctx.lineTo(px(x), py(s.y[k])) : ctx.moveTo(px(x), py(s.y[k]))));
      ctx.stroke();
    }
    if (s.label) ctx.fillText(s.label, w - pad - 120, pad + 14 + 14 * i);
  });
}

function guard(out, fn) {
  try {
    out.classList.remove("err");
    fn();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

function runFringe() {
  const out = $("f-out");
  guard(out, () => {
    const shots = Number($("f-shots").value);
    const r = fringeScan(new Float64Array(nums($("f-phases").value)), Number($("f-j").value), Number($("f-k").value),
      Number($("f-points").value), shots, Number($("f-seed").value));
    const measured = r.counts ? r.counts.map((c) => c / shots) : r.probabilities;
    const f = r.fit;
    const fitted = r.curve_phases.map((p) => f.mean + f.coherence * Math.cos(p + f.offset));
    plot($("f-canvas"), [
      { x: r.curve_phases, y: r.curve, label: "exact P(phi)" },
      { x: r.curve_phases, y: fitted, label: "fit" },
      { x: r.phases, y: measured, points: true, label: "measured" },
    ], { yMin: 0 });
    out.textContent =
      `fitted offset ${f.offset.toFixed(4)} ± ${f.stderr_offset.toFixed(4)} rad (true ${r.true_offset.toFixed(4)})\n` +
      `|rho_jk| ${f.coherence.toFixed(4)}, mean ${f.mean.toFixed(4)}, visibility ${f.visibility.toFixed(4)}`;
  });
}

function runCascade() {
  const out = $("c-out");
  guard(out, () => {
    const r = umziCascade(new Float64Array(nums($("c-eta").value)), new Float64Array(nums($("c-phi").value)));
    const probs = r.state.amplitudes.map(([re, im]) => re * re + im * im);
    const bins = probs.map((_, j) => j);
    plot($("c-canvas"), [{ x: bins, y: probs, bars: true, label: "|alpha_j|^2" }], { yMin: 0 });
    const amps = r.state.amplitudes.map(([re, im], j) =>
      `bin ${j}: ${Math.hypot(re, im).toFixed(4)} ∠ ${Math.atan2(im, re).toFixed(4)}`);
    out.textContent = amps.join("\n") +
      `\nconditional weight ${r.conditional_weight.toFixed(4)}${r.weight_exceeds_unity ? " (exceeds 1)" : ""}`;
  });
}

function runSpin() {
  const out = $("s-out");
  guard(out, () => {
    const r = spinPhases(Number($("s-cone").value), Number($("s-gap").value), Number($("s-rate").value),
      Number($("s-cycles").value), Number($("s-steps").value));
    plot($("s-canvas"), [
      { x: r.times, y: r.beta, label: "beta (total)" },
      { x: r.times, y: r.phi_dyn, label: "phi_dyn" },
      { x: r.times, y: r.gamma, label: "gamma" },
    ]);
    const last = (v) => v[v.length - 1];
    let text = `beta ${last(r.beta).toFixed(4)}, phi_dyn ${last(r.phi_dyn).toFixed(4)}, gamma ${last(r.gamma).toFixed(4)}\n` +
      `adiabaticity ratio ${r.adiabaticity_ratio.toFixed(1)}${r.non_adiabatic ? " (non-adiabatic)" : ""}`;
    if (r.berry) text += `\nsolid-angle Berry phase ${r.berry.solid_angle.toFixed(4)}, Wilson loop ${r.berry.wilson_loop.toFixed(4)}`;
    out.textContent = text;
  });
}

await init();
$("f-run").onclick = runFringe;
$("c-run").onclick = runCascade;
$("s-run").onclick = runSpin;
runFringe();
runCascade();
runSpin();
