import init, { taylor_curve_json, fit_curve_json, rff_curve_json } from "./pkg/mfga_demo.js";

const RANGE = 3;

function $(id) {
  return document.getElementById(id);
}

function value(id) {
  return Number($(id).value);
}

function showValue(id, text) {
  const out = $(id + "-v");
  if (out) out.textContent = text ?? $(id).value;
}

class Plot {
  constructor(canvas, yMin, yMax) {
    this.ctx = canvas.getContext("2d");
    this.w = canvas.width;
    this.h = canvas.height;
    this.yMin = yMin;
    this.yMax = yMax;
    this.ctx.clearRect(0, 0, this.w, this.h);
    this.axes();
  }

  px(x) {
    return ((x + RANGE) / (2 * RANGE)) * this.w;
  }

  py(y) {
    const clamped = Math.min(Math.max(y, this.yMin), this.yMax);
    return this.h - ((clamped - this.yMin) / (this.yMax - this.yMin)) * this.h;
  }

  axes() {
    const c = this.ctx;
    c.strokeStyle = "#ddd";
    c.lineWidth = 1;
    c.beginPath();
    c.moveTo(0, this.py(0));
    c.lineTo(this.w, this.py(0));
    c.moveTo(this.px(0), 0);
    c.lineTo(this.px(0), this.h);
    c.stroke();
  }

  line(xs, ys, color, width = 2, dash = []) {
    const c = this.ctx;
    c.strokeStyle = color;
    c.lineWidth = width;
    c.setLineDash(dash);
    c.beginPath();
    xs.forEach((x, i) => (i === 0 ? c.moveTo(this.px(x), this.py(ys[i])) : c.lineTo(this.px(x), this.py(ys[i]))));
    c.stroke();
    c.setLineDash([]);
  }

  dots(xs, ys, color) {
    const c = this.ctx;
    c.fillStyle = color;
    xs.forEach((x, i) => {
      c.beginPath();
      c.arc(this.px(x), this.py(ys[i]), 2.5, 0, 2 * Math.PI);
      c.fill();
    });
  }
}

function guarded(f) {
  return () => {
    try {
      $("error").textContent = "";
      f();
    } catch (e) {
      $("error").textContent = String(e);
    }
  };
}

const drawTaylor = guarded(() => {
  ["t-order", "t-sigma", "t-anchor"].forEach((id) => showValue(id));
  const d = JSON.parse(taylor_curve_json(value("t-sigma"), value("t-order"), value("t-anchor"), 301));
  const plot = new Plot($("t-canvas"), -0.5, 1.5);
  plot.line(d.t, d.exact.map((v, i) => v + d.bound[i]), "#1f77b4", 1, [4, 4]);
  plot.line(d.t, d.exact.map((v, i) => v - d.bound[i]), "#1f77b4", 1, [4, 4]);
  plot.line(d.t, d.exact, "#222");
  plot.line(d.t, d.approx, "#d62728");
  const worst = Math.max(...d.exact.map((v, i) => Math.abs(v - d.approx[i])));
  $("t-stat").textContent = `${d.features} features, max |error| on the plot = ${worst.toExponential(2)}`;
});

const drawFit = guarded(() => {
  ["f-m", "f-n", "f-noise", "f-sigma"].forEach((id) => showValue(id));
  const d = JSON.parse(
    fit_curve_json(value("f-n"), value("f-m"), value("f-noise"), value("f-sigma"), 1e-4, value("f-seed"))
  );
  const plot = new Plot($("f-canvas"), -2.5, 2.5);
  plot.dots(d.train_x, d.train_y, "#bbb");
  plot.line(d.t, d.truth, "#222");
  plot.line(d.t, d.rks, "#2ca02c");
  plot.line(d.t, d.mfga, "#d62728");
  $("f-stat").textContent =
    `MSE vs target: greedy ${d.mfga_mse.toFixed(4)}, random ${d.rks_mse.toFixed(4)}; ` +
    `selected Taylor orders [${d.selected.join(", ")}]`;
});

const drawRff = guarded(() => {
  const m = Math.round(10 ** value("r-m"));
  showValue("r-m", String(m));
  showValue("r-sigma");
  const d = JSON.parse(rff_curve_json(m, value("r-sigma"), value("r-seed"), 301));
  const plot = new Plot($("r-canvas"), -0.5, 1.5);
  plot.line(d.t, d.exact.map((v) => v + 3 * d.scale), "#1f77b4", 1, [4, 4]);
  plot.line(d.t, d.exact.map((v) => v - 3 * d.scale), "#1f77b4", 1, [4, 4]);
  plot.line(d.t, d.exact, "#222");
  plot.line(d.t, d.estimate, "#2ca02c");
  const worst = Math.max(...d.exact.map((v, i) => Math.abs(v - d.estimate[i])));
  $("r-stat").textContent = `M = ${m}, max |error| = ${worst.toFixed(4)}, 3√(2/M) = ${(3 * d.scale).toFixed(4)}`;
});

await init();
for (const [ids, draw] of [
  [["t-order", "t-sigma", "t-anchor"], drawTaylor],
  [["f-m", "f-n", "f-noise", "f-sigma", "f-seed"], drawFit],
  [["r-m", "r-sigma", "r-seed"], drawRff],
]) {
  ids.forEach((id) => $(id).addEventListener("input", draw));
  draw();
}
