import init, { scheduleCurves, WarpDemo, LwlrDemo } from "./pkg/viewsynth_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function blit(canvas, rgba, w, h, scale = 2) {
  canvas.width = w;
  canvas.height = h;
  canvas.style.width = `${w * scale}px`;
  canvas.style.height = `${h * scale}px`;
  canvas.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
}

function drawSchedule() {
  const table = scheduleCurves(num("s-tde"), num("s-vde"), num("s-bw"));
  const canvas = $("s-plot");
  const ctx = canvas.getContext("2d");
  const [W, H, pad] = [canvas.width, canvas.height, 24];
  const n = table.length / 3;
  const x = (t) => pad + ((W - 2 * pad) * t) / (n - 1);
  const y = (v) => H - pad - (H - 2 * pad) * v;
  ctx.clearRect(0, 0, W, H);
  ctx.strokeStyle = "#bbb";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);

  const curve = (col, map, color, dash) => {
    ctx.beginPath();
    ctx.setLineDash(dash);
    ctx.strokeStyle = color;
    let started = false;
    for (let t = 0; t < n; t++) {
      const v = map(table[3 * t + col]);
      if (!Number.isFinite(v)) continue;
      started ? ctx.lineTo(x(t), y(v)) : ctx.moveTo(x(t), y(v));
      started = true;
    }
    ctx.stroke();
  };
  curve(0, (w) => w, "#c33", []);
  curve(1, (f) => f / 1000, "#36c", [5, 4]);
  curve(2, (s) => 0.5 + s / 10, "#393", [2, 3]);
  ctx.setLineDash([]);
  const at = (t) => table[3 * t].toFixed(3);
  $("s-out").textContent = `W(100)=${at(100)}  W(300)=${at(300)}  W(650)=${at(650)}  W(1000)=${at(1000)}`;
}

let warp;
function drawWarp() {
  const rgba = warp.render(num("w-tx"), num("w-ty"), num("w-tz"), num("w-yaw"), $("w-fill").checked);
  blit($("w-dst"), rgba, 160, 120);
  $("w-out").textContent = `coverage ${(100 * warp.coverage).toFixed(1)}%`;
}

function drawLwlr() {
  const [w, h] = [96, 72];
  try {
    const demo = new LwlrDemo(w, h, num("l-n"), num("l-bw"), BigInt(num("l-seed")));
    blit($("l-in"), demo.inputRgba(), w, h, 3);
    blit($("l-rec"), demo.recoveredRgba(), w, h, 3);
    blit($("l-gt"), demo.truthRgba(), w, h, 3);
    $("l-out").textContent =
      `mean relative error: input ${(100 * demo.inputError).toFixed(2)}%, ` +
      `recovered ${(100 * demo.recoveredError).toFixed(2)}%`;
    demo.free();
  } catch (e) {
    $("l-out").textContent = `error: ${e.message}`;
  }
}

async function main() {
  await init();
  $("status").remove();
  warp = new WarpDemo(160, 120);
  blit($("w-src"), warp.sourceRgba(), 160, 120);
  for (const id of ["s-tde", "s-vde", "s-bw"]) $(id).addEventListener("input", drawSchedule);
  for (const id of ["w-tx", "w-ty", "w-tz", "w-yaw", "w-fill"]) $(id).addEventListener("input", drawWarp);
  for (const id of ["l-n", "l-bw", "l-seed"]) $(id).addEventListener("input", drawLwlr);
  drawSchedule();
  drawWarp();
  drawLwlr();
}

main().catch((e) => {
  $("status").textContent = `failed to start: ${e}`;
});
