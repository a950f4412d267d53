import init, { Filament, Wave, classify } from "./pkg/hasimoto_web.js";

const $ = (id) => document.getElementById(id);
const exp = (x) => x.toExponential(2);

function plotLine(ctx, ys, lo, hi, color) {
  const { width, height } = ctx.canvas;
  ctx.strokeStyle = color;
  ctx.beginPath();
  ys.forEach((y, j) => {
    const px = (j / (ys.length - 1)) * width;
    const py = height - ((y - lo) / (hi - lo || 1)) * (height - 20) - 10;
    j === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
}

// filament: orthographic view rotating slowly about the vertical axis
let filament = null;
let running = false;
let yaw = 0.6;

function startFilament() {
  const preset = $("preset").value;
  const params = {
    circle: [1, 0, 0],
    perturbed_circle: [0.1, 0, 3],
    helix: [1, 0.5, 0],
    wavy_ring: [0.1, 0.3, 3],
  }[preset];
  try {
    filament?.free();
    filament = new Filament(preset, Number($("n").value), params[0], params[1], params[2],
      $("fa").value, $("fb").value, $("fc").value, Number($("fw").value));
    running = true;
  } catch (e) {
    filament = null;
    $("f-stats").textContent = String(e);
  }
}

function drawFilament() {
  const ctx = $("f-canvas").getContext("2d");
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  const p = filament.points();
  const n = p.length / 3;
  let cx = 0, cy = 0, cz = 0;
  for (let j = 0; j < n; j++) { cx += p[3 * j]; cy += p[3 * j + 1]; cz += p[3 * j + 2]; }
  cx /= n; cy /= n; cz /= n;
  const c = Math.cos(yaw), s = Math.sin(yaw), tilt = 0.35;
  const scale = Math.min(width, height) / 3.2;
  ctx.strokeStyle = "#1f5fa8";
  ctx.lineWidth = 2;
  ctx.beginPath();
  for (let j = 0; j <= n; j++) {
    const i = j % n;
    const x = p[3 * i] - cx, y = p[3 * i + 1] - cy, z = p[3 * i + 2] - cz;
    const u = c * x - s * y;
    const depth = s * x + c * y;
    const v = Math.cos(tilt) * z - Math.sin(tilt) * depth;
    const px = width / 2 + scale * u, py = height / 2 - scale * v;
    j === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  }
  ctx.stroke();

  const kctx = $("f-k").getContext("2d");
  kctx.clearRect(0, 0, kctx.canvas.width, kctx.canvas.height);
  const k = filament.curvature(), tau = filament.torsion();
  const lo = Math.min(...k, ...tau), hi = Math.max(...k, ...tau);
  plotLine(kctx, k, lo, hi, "#c0392b");
  plotLine(kctx, tau, lo, hi, "#27ae60");
  $("f-stats").textContent =
    `t = ${filament.time().toFixed(3)}   length drift ${exp(filament.lengthDrift())}` +
    `   bending energy drift ${exp(filament.energyDrift())}   (red k, green tau)`;
}

function tickFilament() {
  if (filament && running) {
    try {
      filament.advance(0.005);
    } catch (e) {
      running = false;
      $("f-stats").textContent = String(e);
    }
    yaw += 0.004;
    drawFilament();
  }
}

// soliton
let wave = null;

function startWave() {
  try {
    wave?.free();
    wave = new Wave(512, 40, Number($("wa").value), Number($("wk").value), $("solver").value, Number($("ww").value));
  } catch (e) {
    wave = null;
    $("w-stats").textContent = String(e);
  }
}

function tickWave() {
  if (!wave) return;
  try {
    wave.advance(2e-3, 5);
  } catch (e) {
    $("w-stats").textContent = String(e);
    wave = null;
    return;
  }
  const ctx = $("w-canvas").getContext("2d");
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  const m = wave.modulus();
  const top = 1.2 * Math.max(2 * Number($("wa").value), ...m);
  plotLine(ctx, wave.phase(), -Math.PI * 1.05, Math.PI * 1.05, "#bbb");
  plotLine(ctx, m, 0, top, "#8e44ad");
  $("w-stats").textContent =
    `t = ${wave.time().toFixed(2)}   max |psi| = ${Math.max(...m).toFixed(6)}` +
    `   norm drift ${exp(wave.normDrift())}   (purple |psi|, grey phase)`;
}

function runClassify() {
  try {
    const report = JSON.parse(classify($("ca").value, $("cb").value, $("cc").value, Number($("cw").value)));
    $("c-out").textContent = JSON.stringify(report, null, 2);
  } catch (e) {
    $("c-out").textContent = String(e);
  }
}

await init();
$("f-start").onclick = startFilament;
$("f-pause").onclick = () => { running = !running; };
$("w-start").onclick = startWave;
$("c-run").onclick = runClassify;
startFilament();
startWave();
runClassify();
(function frame() {
  tickFilament();
  tickWave();
  requestAnimationFrame(frame);
})();
