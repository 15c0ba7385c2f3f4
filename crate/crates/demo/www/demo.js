// Drives the three wasm operations with sliders and draws on canvases.
// No framework; plain ES module loading the wasm-bindgen output from ./pkg.

import init, {
  excitation_series,
  excitation_psd,
  simulate_response,
  density_evolution,
} from "./pkg/odyn_demo.js";

const DT = 0.01;
const T = 4.0;

const $ = (id) => document.getElementById(id);

function hookControls(boxId, onChange) {
  const box = $(boxId);
  const inputs = box.querySelectorAll("input");
  for (const input of inputs) {
    const show = () => {
      input.nextElementSibling.textContent = input.value;
    };
    input.addEventListener("input", () => {
      show();
      onChange();
    });
    show();
  }
}

function clearCanvas(ctx) {
  const { canvas } = ctx;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
}

function drawSeries(ctx, seriesList, colors, labels) {
  clearCanvas(ctx);
  const { width, height } = ctx.canvas;
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of seriesList) {
    for (const v of s) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!(hi > lo)) {
    hi = lo + 1;
  }
  const pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  const n = seriesList[0].length;
  const x = (i) => (i / (n - 1)) * (width - 10) + 5;
  const y = (v) => height - ((v - lo) / (hi - lo)) * (height - 10) - 5;
  // Zero axis.
  ctx.strokeStyle = "#8886";
  ctx.beginPath();
  ctx.moveTo(0, y(0));
  ctx.lineTo(width, y(0));
  ctx.stroke();
  seriesList.forEach((s, si) => {
    ctx.strokeStyle = colors[si];
    ctx.lineWidth = 1.4;
    ctx.beginPath();
    s.forEach((v, i) => (i === 0 ? ctx.moveTo(x(i), y(v)) : ctx.lineTo(x(i), y(v))));
    ctx.stroke();
    if (labels && labels[si]) {
      ctx.fillStyle = colors[si];
      ctx.fillText(labels[si], 10, 14 + 14 * si);
    }
  });
}

function updateExcitation() {
  const wg = +$("exc-wg").value;
  const zg = +$("exc-zg").value;
  const s0 = +$("exc-s0").value;
  const seed = +$("exc-seed").value;
  const wave = excitation_series(wg, zg, s0, 0.2, 12.0, DT, T, seed);
  drawSeries($("exc-wave").getContext("2d"), [wave], ["#2563eb"], ["record"]);

  const psd = excitation_psd(wg, zg, s0, 0.2, 12.0, T);
  const ctx = $("exc-psd").getContext("2d");
  clearCanvas(ctx);
  const { width, height } = ctx.canvas;
  let gmax = 0;
  for (let i = 1; i < psd.length; i += 2) gmax = Math.max(gmax, psd[i]);
  const bins = psd.length / 2;
  const bw = (width - 10) / bins;
  ctx.fillStyle = "#f59e0b";
  for (let b = 0; b < bins; b++) {
    const g = psd[2 * b + 1] / (gmax || 1);
    ctx.fillRect(5 + b * bw, height - 5 - g * (height - 20), Math.max(1, bw - 1), g * (height - 20));
  }
  ctx.fillStyle = "#888";
  ctx.fillText("target one-sided spectrum per synthesis bin", 10, 12);
  updateSimulation();
}

function updateSimulation() {
  const m = +$("sim-m").value;
  const k = +$("sim-k").value;
  const c = +$("sim-c").value;
  const fs = +$("sim-f").value;
  const wg = +$("exc-wg").value;
  const zg = +$("exc-zg").value;
  const s0 = +$("exc-s0").value;
  const seed = +$("exc-seed").value;
  const out = simulate_response(m, k, c, fs, wg, zg, s0, DT, T, seed);
  if (!out.length) return;
  const n = out.length / 3;
  const u = out.slice(0, n);
  const du = out.slice(n, 2 * n);
  const ddu = out.slice(2 * n);
  const norm = (s) => {
    let a = 0;
    for (const v of s) a = Math.max(a, Math.abs(v));
    return a ? Array.from(s, (v) => v / a) : Array.from(s);
  };
  drawSeries(
    $("sim-plot").getContext("2d"),
    [norm(u), norm(du), norm(ddu)],
    ["#2563eb", "#16a34a", "#dc2626"],
    ["displacement (scaled)", "velocity (scaled)", "acceleration (scaled)"]
  );
}

function updateDensity() {
  const klo = +$("pdf-klo").value;
  const khi = Math.max(+$("pdf-khi").value, klo + 10);
  const z = +$("pdf-z").value;
  const hz = +$("pdf-hz").value;
  const nsel = +$("pdf-nsel").value;
  const out = density_evolution(1.0, klo, khi, z, 20.0, hz, nsel, 96, DT, T);
  if (!out.length) return;
  const xMin = out[0];
  const dx = out[1];
  const nT = out[2];
  const nX = out[3];
  const p = out.slice(4);
  const ctx = $("pdf-plot").getContext("2d");
  clearCanvas(ctx);
  const { width, height } = ctx.canvas;
  let pmax = 0;
  for (const v of p) pmax = Math.max(pmax, v);
  const cw = width / nT;
  const ch = height / nX;
  for (let t = 0; t < nT; t++) {
    for (let i = 0; i < nX; i++) {
      const v = p[t * nX + i] / (pmax || 1);
      if (v <= 0.002) continue;
      const heat = Math.pow(v, 0.4);
      ctx.fillStyle = `rgba(${40 + 215 * heat}, ${60 * (1 - heat) + 30}, ${160 * (1 - heat)}, ${0.25 + 0.75 * heat})`;
      ctx.fillRect(t * cw, height - (i + 1) * ch, Math.ceil(cw), Math.ceil(ch));
    }
  }
  // Mean trace.
  ctx.strokeStyle = "#fff";
  ctx.lineWidth = 1.2;
  ctx.beginPath();
  for (let t = 0; t < nT; t++) {
    let mass = 0;
    let mean = 0;
    for (let i = 0; i < nX; i++) {
      const w = p[t * nX + i];
      mass += w;
      mean += (xMin + (i + 0.5) * dx) * w;
    }
    mean = mass ? mean / mass : 0;
    const ypix = height - ((mean - xMin) / (nX * dx)) * height;
    t === 0 ? ctx.moveTo(0, ypix) : ctx.lineTo(t * cw, ypix);
  }
  ctx.stroke();
  ctx.fillStyle = "#888";
  ctx.fillText("p(x, t): time right, response up, mean in white", 10, 12);
}

async function main() {
  await init();
  $("status").style.display = "none";
  hookControls("exc-controls", updateExcitation);
  hookControls("sim-controls", updateSimulation);
  hookControls("pdf-controls", updateDensity);
  updateExcitation();
  updateDensity();
}

main().catch((e) => {
  $("status").textContent =
    "Failed to load the WebAssembly module — build it first: wasm-pack build crates/demo --target web (" + e + ")";
});
