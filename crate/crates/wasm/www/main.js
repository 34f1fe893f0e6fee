import init, { ar2Spectra, ma1Cepstra, threeGroupFit } from "./pkg/cepfda_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#c33", "#36c", "#393"];

function frame(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  const pad = 30;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(pad, 5, canvas.width - pad - 5, canvas.height - pad - 5);
  ctx.fillStyle = "#666";
  ctx.font = "10px sans-serif";
  ctx.fillText(y1.toFixed(2), 0, 12);
  ctx.fillText(y0.toFixed(2), 0, canvas.height - pad);
  ctx.fillText(x0.toFixed(2), pad, canvas.height - 10);
  ctx.fillText(x1.toFixed(2), canvas.width - 30, canvas.height - 10);
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (canvas.width - pad - 5);
  const sy = (y) => 5 + (1 - (y - y0) / (y1 - y0)) * (canvas.height - pad - 5);
  return { ctx, sx, sy };
}

function line({ ctx, sx, sy }, xs, ys, color) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
}

function guard(errId, fn) {
  $(errId).textContent = "";
  try { fn(); } catch (e) { $(errId).textContent = String(e.message ?? e); }
}

function runSpectra() {
  guard("s-err", () => {
    const len = num("s-len");
    const v = ar2Spectra(num("s-phi1"), num("s-phi2"), num("s-sigma2"), len, num("s-tapers"), num("s-seed"));
    const half = v.length / 3;
    const xs = Array.from({ length: half }, (_, m) => m / len);
    const blocks = [0, 1, 2].map((b) => Array.from(v.subarray(b * half, (b + 1) * half)));
    const f = frame($("s-plot"), xs, blocks.flat());
    line(f, xs, blocks[1], "#999");
    line(f, xs, blocks[2], "#c33");
    line(f, xs, blocks[0], "#000");
  });
}

function runCepstrum() {
  $("c-theta-v").textContent = $("c-theta").value;
  guard("c-err", () => {
    const l = num("c-l");
    const v = ma1Cepstra(num("c-theta"), num("c-sigma2"), num("c-len"), l, num("c-reps"), 1);
    let html = "<tr><th>ℓ</th><th>closed form</th><th>mean estimate</th></tr>";
    for (let k = 0; k < l; k++) {
      html += `<tr><td>${k}</td><td>${v[k].toFixed(4)}</td><td>${v[l + k].toFixed(4)}</td></tr>`;
    }
    $("c-table").innerHTML = html;
  });
}

function runFit() {
  guard("f-err", () => {
    const grid = 200;
    const fit = threeGroupFit(num("f-n"), num("f-len"), num("f-l"), num("f-s2"), grid, num("f-seed"));
    const q = fit.q;
    const groups = fit.groups;
    const eig = Array.from(fit.eigenvalues, (t) => t.toFixed(3)).join(", ");
    $("f-summary").textContent =
      `Q = ${q}; eigenvalues ${eig}; resubstitution ${fit.correct}/${groups.length} correct`;

    const w = fit.weightFunctions;
    const half = grid / 2 + 1;
    const xs = Array.from({ length: half }, (_, g) => g / grid);
    const rows = Array.from({ length: q }, (_, k) => Array.from(w.subarray(k * grid, k * grid + half)));
    const fw = frame($("f-weights"), xs, rows.flat());
    rows.forEach((r, k) => line(fw, xs, r, k ? "#888" : "#000"));

    const s = fit.scores;
    const d1 = groups.map((_, i) => s[i * q]);
    const d2 = groups.map((_, i) => (q > 1 ? s[i * q + 1] : 0));
    const fs = frame($("f-scatter"), d1, d2);
    groups.forEach((g, i) => {
      fs.ctx.fillStyle = COLORS[g % COLORS.length];
      fs.ctx.fillRect(fs.sx(d1[i]) - 2, fs.sy(d2[i]) - 2, 4, 4);
    });
    fit.free();
  });
}

await init();
$("status").textContent = "";
$("s-run").onclick = runSpectra;
$("f-run").onclick = runFit;
for (const id of ["c-theta", "c-sigma2", "c-len", "c-l", "c-reps"]) $(id).oninput = runCepstrum;
runSpectra();
runCepstrum();
runFit();
