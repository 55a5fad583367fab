import init, { PhantomView, DiscPair, Evolution, energyCurve } from "./pkg/elastic_seg_wasm.js";

const SIZE = 64;
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function blit(canvasId, rgba, size) {
  const canvas = $(canvasId);
  const off = new OffscreenCanvas(size, size);
  off.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), size, size), 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function plot(canvasId, ys, { marker = null, xLabel = "", yLabel = "" } = {}) {
  const canvas = $(canvasId);
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  if (ys.length === 0) return;
  const lo = Math.min(...ys), hi = Math.max(...ys);
  const span = hi - lo || 1;
  const x = (i) => pad + (i / Math.max(ys.length - 1, 1)) * (w - pad - 8);
  const y = (v) => h - pad - ((v - lo) / span) * (h - pad - 8);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, 8); ctx.lineTo(pad, h - pad); ctx.lineTo(w - 8, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.font = "11px system-ui";
  ctx.fillText(hi.toExponential(2), 2, 14);
  ctx.fillText(lo.toExponential(2), 2, h - pad);
  ctx.fillText(xLabel, w / 2 - 20, h - 10);
  ctx.fillText(yLabel, pad + 4, 18);
  ctx.strokeStyle = "#1f5fbf";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ys.forEach((v, i) => (i === 0 ? ctx.moveTo(x(i), y(v)) : ctx.lineTo(x(i), y(v))));
  ctx.stroke();
  if (marker !== null && marker < ys.length) {
    ctx.fillStyle = "#c0392b";
    ctx.beginPath();
    ctx.arc(x(marker), y(ys[marker]), 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function bindOutputs(ids, onChange) {
  for (const id of ids) {
    const show = () => ($(`${id}-v`).textContent = $(id).value);
    show();
    $(id).addEventListener("input", () => { show(); onChange(); });
  }
}

function drawPhantom() {
  const view = new PhantomView(SIZE, num("ph-seed"), num("ph-contrast"), num("ph-noise"), num("ph-branches"));
  blit("ph-image", view.imageRgba(), SIZE);
  blit("ph-overlay", view.overlayRgba(), SIZE);
  $("ph-stat").textContent = `foreground fraction ${(100 * view.foregroundFraction).toFixed(1)}%`;
  view.free();
}

let curveKey = "";
let curve = [];
function drawDiscs() {
  const offset = num("dp-offset"), radius = num("dp-radius"), alpha = num("dp-alpha");
  const key = `${radius}/${alpha}`;
  if (key !== curveKey) {
    curve = Array.from(energyCurve(SIZE, radius, alpha, Number($("dp-offset").max)));
    curveKey = key;
  }
  const pair = new DiscPair(SIZE, radius, offset, alpha);
  blit("dp-force", pair.forceRgba(), SIZE);
  $("dp-stat").textContent = `energy ${pair.energy.toExponential(4)} at offset ${offset}`;
  plot("dp-curve", curve, { marker: offset, xLabel: "offset (px)", yLabel: "energy" });
  pair.free();
}

let evo = null;
let running = false;
function resetEvolution() {
  if (evo) evo.free();
  evo = new Evolution(SIZE, $("ev-target").value, $("ev-init").value, num("ev-shift"), num("ev-alpha"), num("ev-eta"));
  drawEvolution();
}
function drawEvolution() {
  blit("ev-view", evo.rgba(), SIZE);
  plot("ev-curve", Array.from(evo.energies()), { xLabel: "step", yLabel: "energy" });
  $("ev-stat").textContent = `step ${evo.steps}   energy ${evo.energy.toExponential(4)}   IoU ${evo.iou().toFixed(4)}`;
}
function tick() {
  if (!running) return;
  evo.step(5);
  drawEvolution();
  if (evo.steps >= 2000) { toggleRun(); return; }
  requestAnimationFrame(tick);
}
function toggleRun() {
  running = !running;
  $("ev-run").textContent = running ? "Pause" : "Run";
  if (running) requestAnimationFrame(tick);
}

async function main() {
  try {
    await init();
  } catch (e) {
    $("status").textContent = `Could not load the WebAssembly module: ${e}`;
    return;
  }
  $("status").remove();
  bindOutputs(["ph-seed", "ph-contrast", "ph-noise", "ph-branches"], drawPhantom);
  bindOutputs(["dp-offset", "dp-radius", "dp-alpha"], drawDiscs);
  bindOutputs(["ev-shift", "ev-alpha", "ev-eta"], resetEvolution);
  $("ev-target").addEventListener("change", resetEvolution);
  $("ev-init").addEventListener("change", resetEvolution);
  $("ev-step").addEventListener("click", () => { evo.step(10); drawEvolution(); });
  $("ev-run").addEventListener("click", toggleRun);
  $("ev-reset").addEventListener("click", () => { if (running) toggleRun(); resetEvolution(); });
  drawPhantom();
  drawDiscs();
  resetEvolution();
}

main();
