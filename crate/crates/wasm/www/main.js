import init, { heatmaps, scree, pd_rate } from "./pkg/covchol_wasm.js";

const $ = (id) => document.getElementById(id);
const COLORS = { truth: "#000", sample: "#d62728", sample_banding: "#1f77b4", chol_banding: "#2ca02c" };

function params() {
  return {
    model: $("model").value,
    p: Number($("p").value),
    n: Number($("n").value),
    k: Number($("k").value),
    seed: Number($("seed").value),
    reps: Number($("reps").value),
  };
}

function call(f) {
  $("status").textContent = "";
  try {
    return JSON.parse(f());
  } catch (e) {
    $("status").textContent = String(e);
    return null;
  }
}

// Blue for negative, red for positive, white at zero.
function color(v, scale) {
  const t = Math.max(-1, Math.min(1, v / scale));
  const c = Math.round(255 * (1 - Math.abs(t)));
  return t >= 0 ? `rgb(255,${c},${c})` : `rgb(${c},${c},255)`;
}

function heatmap(title, m, note) {
  const p = m.length;
  const cell = Math.max(1, Math.floor(240 / p));
  const canvas = document.createElement("canvas");
  canvas.width = canvas.height = cell * p;
  const ctx = canvas.getContext("2d");
  const scale = Math.max(...m.map((r) => Math.max(...r.map(Math.abs))));
  m.forEach((row, i) =>
    row.forEach((v, j) => {
      ctx.fillStyle = color(v, scale);
      ctx.fillRect(j * cell, i * cell, cell, cell);
    }),
  );
  const div = document.createElement("div");
  div.className = "panel";
  div.append(canvas, document.createElement("br"), title);
  if (note) div.append(document.createElement("br"), note);
  return div;
}

function drawScree(curves) {
  const canvas = $("scree");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const names = Object.keys(COLORS);
  const all = names.flatMap((k) => curves[k]);
  const ymax = Math.max(...all);
  const ymin = Math.min(0, ...all);
  const p = curves.truth.length;
  const x = (i) => 40 + (i * (canvas.width - 60)) / Math.max(1, p - 1);
  const y = (v) => canvas.height - 20 - ((v - ymin) * (canvas.height - 40)) / (ymax - ymin || 1);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(40, y(0));
  ctx.lineTo(canvas.width - 20, y(0));
  ctx.stroke();
  names.forEach((name, idx) => {
    ctx.strokeStyle = COLORS[name];
    ctx.beginPath();
    curves[name].forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
    ctx.stroke();
    ctx.fillStyle = COLORS[name];
    ctx.fillText(name, canvas.width - 140, 20 + 14 * idx);
  });
}

function draw() {
  const q = params();
  const h = call(() => heatmaps(q.model, q.p, q.n, q.k, q.seed));
  if (!h) return;
  const fmt = (r) => `loss ${r.operator_loss.toFixed(3)}, ${r.positive_definite ? "PD" : "not PD"}`;
  $("panels").replaceChildren(
    heatmap("truth", h.truth),
    heatmap("sample", h.sample.matrix, fmt(h.sample)),
    heatmap(`sample banded, k = ${q.k}`, h.sample_banding.matrix, fmt(h.sample_banding)),
    heatmap(`Cholesky banded, k = ${q.k}`, h.chol_banding.matrix, fmt(h.chol_banding)),
  );
  const s = call(() => scree(q.model, q.p, q.n, q.k, q.seed));
  if (s) drawScree(s);
}

function rate() {
  const q = params();
  const r = call(() => pd_rate(q.model, q.p, q.n, q.k, q.reps, q.seed));
  if (!r) return;
  const rows = ["sample", "sample_banding", "chol_banding"].map((k) => {
    const tr = document.createElement("tr");
    tr.innerHTML = `<td>${k}</td><td>${r[k].toFixed(1)}</td>`;
    return tr;
  });
  $("rates").replaceChildren($("rates").rows[0], ...rows);
}

await init();
$("draw").addEventListener("click", draw);
$("rate").addEventListener("click", rate);
draw();
