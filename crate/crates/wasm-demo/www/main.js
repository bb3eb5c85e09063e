// pkg/ comes from `wasm-bindgen --target web`; see the README.
import init, { penaltyCurve, proxMap, regularizationPath, pathWidth } from "./pkg/penreg_wasm_demo.js";

const SHAPES = {
  alasso: [1, 1.5, 2], classo: [0.5, 1, 1.5], cpf: [5, 15, 25], en: [0.25, 0.5, 0.75],
  flash: [0.25, 0.5, 0.75], lq: [1.25, 1.5, 1.75], mcplus: [1, 3, 5], scad: [10, 20, 30],
};
const COLORS = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666"];
const $ = (id) => document.getElementById(id);

function fillShapes() {
  const opts = SHAPES[$("family").value] || [];
  $("shape").innerHTML = opts.map((s, i) => `<option ${i === 1 ? "selected" : ""}>${s}</option>`).join("");
  $("shape").disabled = opts.length === 0;
}

const shape = () => Number($("shape").value || 0);

// Draws series of [x, y] pairs into the box (x0, y0, w, h) of a canvas.
function plot(ctx, box, series, { xr, yr, dashed = [] } = {}) {
  const [x0, y0, w, h] = box;
  const xs = series.flatMap((s) => s.pts.map((p) => p[0]));
  const ys = series.flatMap((s) => s.pts.map((p) => p[1]));
  const [xa, xb] = xr || [Math.min(...xs), Math.max(...xs)];
  let [ya, yb] = yr || [Math.min(...ys), Math.max(...ys)];
  if (ya === yb) { ya -= 1; yb += 1; }
  const X = (x) => x0 + ((x - xa) / (xb - xa)) * w;
  const Y = (y) => y0 + h - ((y - ya) / (yb - ya)) * h;
  ctx.strokeStyle = "#bbb";
  ctx.lineWidth = 1;
  ctx.setLineDash([]);
  ctx.strokeRect(x0, y0, w, h);
  if (ya < 0 && yb > 0) { ctx.beginPath(); ctx.moveTo(x0, Y(0)); ctx.lineTo(x0 + w, Y(0)); ctx.stroke(); }
  if (xa < 0 && xb > 0) { ctx.beginPath(); ctx.moveTo(X(0), y0); ctx.lineTo(X(0), y0 + h); ctx.stroke(); }
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(yb.toPrecision(3), x0 + 3, y0 + 11);
  ctx.fillText(ya.toPrecision(3), x0 + 3, y0 + h - 3);
  ctx.fillText(xa.toPrecision(3), x0 + 3, y0 + h + 12);
  ctx.fillText(xb.toPrecision(3), x0 + w - 30, y0 + h + 12);
  series.forEach((s, i) => {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.setLineDash(dashed.includes(i) ? [5, 4] : []);
    ctx.beginPath();
    s.pts.forEach(([x, y], k) => (k ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y))));
    ctx.stroke();
  });
}

const pairs = (flat) => Array.from({ length: flat.length / 2 }, (_, i) => [flat[2 * i], flat[2 * i + 1]]);

function drawCurves() {
  const ctx = $("curves").getContext("2d");
  ctx.clearRect(0, 0, 940, 320);
  try {
    const fam = $("family").value, lam = Number($("lambda").value);
    const g = pairs(penaltyCurve(fam, lam, shape(), 4, 401));
    const p = pairs(proxMap(fam, lam, shape(), Number($("curv").value), 4, 801));
    plot(ctx, [10, 10, 440, 285], [{ pts: g, color: COLORS[0] }]);
    plot(ctx, [490, 10, 440, 285], [{ pts: p, color: COLORS[1] }, { pts: [[-4, -4], [4, 4]], color: "#999" }],
      { xr: [-4, 4], yr: [-4, 4], dashed: [1] });
    $("err1").textContent = "";
  } catch (e) {
    $("err1").textContent = String(e.message || e);
  }
}

function drawPath() {
  const ctx = $("path").getContext("2d");
  ctx.clearRect(0, 0, 940, 360);
  try {
    const flat = regularizationPath($("family").value, shape(), Number($("seed").value) >>> 0,
      Number($("n").value), Number($("noise").value), 60);
    const width = pathWidth(), rows = flat.length / width;
    const series = [];
    for (let j = 1; j < width; j++) {
      const pts = [];
      for (let r = 0; r < rows; r++) pts.push([Math.log10(flat[r * width]), flat[r * width + j]]);
      series.push({ pts, color: COLORS[j - 1] });
    }
    plot(ctx, [10, 10, 920, 320], series);
    $("legend").innerHTML = "x: log10 &lambda; &nbsp; " +
      series.map((s, j) => `<span style="color:${s.color}">&#9632; b${j + 1}</span>`).join("") +
      " &nbsp; (true: 1.5, -1, 0.6, then zeros)";
    $("err2").textContent = "";
  } catch (e) {
    $("err2").textContent = String(e.message || e);
  }
}

function redraw() { drawCurves(); drawPath(); }

await init();
fillShapes();
$("family").addEventListener("change", () => { fillShapes(); redraw(); });
for (const id of ["shape", "lambda", "curv"]) $(id).addEventListener("input", drawCurves);
for (const id of ["shape", "n", "noise", "seed"]) $(id).addEventListener("input", drawPath);
redraw();
