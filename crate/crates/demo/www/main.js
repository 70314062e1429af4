import init, { Drive, ou_path, ou_stationary_std, fedavg } from "./pkg/fddpg_demo.js";

const $ = (id) => document.getElementById(id);

function showError(e) {
  $("error").textContent = String(e && e.message ? e.message : e);
}

// Drive

let drive = null;
let timer = null;

function resetDrive() {
  stopPlay();
  try {
    drive = new Drive(BigInt($("drive-seed").value), Number($("drive-bg").value), Number($("drive-dist").value));
    $("error").textContent = "";
  } catch (e) {
    showError(e);
    drive = null;
  }
  drawDrive();
}

function stepDrive() {
  if (!drive || drive.done()) {
    stopPlay();
    return;
  }
  try {
    drive.step(Number($("drive-accel").value));
  } catch (e) {
    showError(e);
    stopPlay();
  }
  drawDrive();
}

function stopPlay() {
  if (timer !== null) {
    clearInterval(timer);
    timer = null;
    $("drive-play").textContent = "play";
  }
}

function togglePlay() {
  if (timer !== null) {
    stopPlay();
    return;
  }
  timer = setInterval(stepDrive, 100);
  $("drive-play").textContent = "pause";
}

// The grid spans -100..200 m in both axes.
const toCanvas = (canvas, x, y) => [
  ((x + 120) / 340) * canvas.width,
  canvas.height - ((y + 120) / 340) * canvas.height,
];

function drawDrive() {
  const canvas = $("drive-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!drive) return;

  ctx.strokeStyle = "#999";
  ctx.lineWidth = 6;
  const roads = drive.roads();
  for (let i = 0; i < roads.length; i += 4) {
    const [x1, y1] = toCanvas(canvas, roads[i], roads[i + 1]);
    const [x2, y2] = toCanvas(canvas, roads[i + 2], roads[i + 3]);
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
  }

  const signals = drive.signals();
  for (let i = 0; i < signals.length; i += 3) {
    const [x, y] = toCanvas(canvas, signals[i], signals[i + 1]);
    ctx.fillStyle = signals[i + 2] ? "#d22" : "#2a2";
    ctx.fillRect(x - 2, y - 2, 4, 4);
  }

  const [dx, dy] = drive.destination();
  const [cx, cy] = toCanvas(canvas, dx, dy);
  ctx.strokeStyle = "#06c";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(cx, cy, 7, 0, 2 * Math.PI);
  ctx.stroke();

  const v = drive.vehicles();
  for (let i = 0; i < v.length; i += 4) {
    const [x, y] = toCanvas(canvas, v[i], v[i + 1]);
    ctx.save();
    ctx.translate(x, y);
    ctx.rotate(-v[i + 2]);
    ctx.fillStyle = v[i + 3] ? "#06c" : "#555";
    ctx.fillRect(-6, -2.5, 6, 5);
    ctx.restore();
  }

  $("drive-readout").textContent =
    `step    ${drive.steps()}\n` +
    `speed   ${drive.speed().toFixed(2)} m/s\n` +
    `return  ${drive.total_reward().toFixed(3)}\n` +
    `flags   ${drive.flags() || "-"}\n` +
    `ended   ${drive.cause() || "-"}`;
}

// Noise

function drawNoise() {
  const theta = Number($("ou-theta").value);
  const sigma = Number($("ou-sigma").value);
  let path;
  try {
    path = ou_path(theta, sigma, Number($("ou-steps").value), BigInt($("ou-seed").value));
    $("error").textContent = "";
  } catch (e) {
    showError(e);
    return;
  }
  const canvas = $("ou-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const std = ou_stationary_std(theta, sigma);
  const span = Math.max(3 * std, ...path.map(Math.abs), 1e-9);
  const y = (v) => canvas.height / 2 - (v / span) * (canvas.height / 2 - 4);

  ctx.strokeStyle = "#ccc";
  for (const level of [0, std, -std]) {
    ctx.beginPath();
    ctx.moveTo(0, y(level));
    ctx.lineTo(canvas.width, y(level));
    ctx.stroke();
  }
  ctx.strokeStyle = "#c60";
  ctx.beginPath();
  path.forEach((v, i) => {
    const x = (i / (path.length - 1)) * canvas.width;
    i ? ctx.lineTo(x, y(v)) : ctx.moveTo(x, y(v));
  });
  ctx.stroke();

  const mean = path.reduce((a, b) => a + b, 0) / path.length;
  const sd = Math.sqrt(path.reduce((a, b) => a + (b - mean) ** 2, 0) / path.length);
  $("ou-readout").textContent =
    `sample mean ${mean.toFixed(4)}, sample sd ${sd.toFixed(4)}, stationary sd ${std.toFixed(4)} (grey bands)`;
}

// Weighted averaging

const agents = [
  { x: -0.6, y: 0.5, n: 10 },
  { x: 0.7, y: 0.6, n: 30 },
  { x: 0.1, y: -0.7, n: 60 },
];
const colors = ["#c33", "#393", "#36c"];
let dragging = -1;

const fedToCanvas = (canvas, x, y) => [((x + 1) / 2) * canvas.width, ((1 - y) / 2) * canvas.height];
const canvasToFed = (canvas, px, py) => [(px / canvas.width) * 2 - 1, 1 - (py / canvas.height) * 2];

function buildCounts() {
  const box = $("fed-counts");
  agents.forEach((a, i) => {
    const label = document.createElement("label");
    label.style.display = "block";
    label.style.color = colors[i];
    label.textContent = `agent ${i} episodes `;
    const input = document.createElement("input");
    input.type = "number";
    input.min = "0";
    input.value = String(a.n);
    input.addEventListener("input", () => {
      a.n = Math.max(0, Math.floor(Number(input.value)));
      drawFed();
    });
    label.appendChild(input);
    box.appendChild(label);
  });
}

function drawFed() {
  const canvas = $("fed-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  agents.forEach((a, i) => {
    const [x, y] = fedToCanvas(canvas, a.x, a.y);
    i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
  });
  ctx.closePath();
  ctx.stroke();

  agents.forEach((a, i) => {
    const [x, y] = fedToCanvas(canvas, a.x, a.y);
    ctx.fillStyle = colors[i];
    ctx.beginPath();
    ctx.arc(x, y, 4 + Math.sqrt(a.n), 0, 2 * Math.PI);
    ctx.fill();
  });

  let blended;
  try {
    blended = fedavg(
      new Float64Array(agents.flatMap((a) => [a.x, a.y])),
      2,
      new Uint32Array(agents.map((a) => a.n)),
    );
    $("error").textContent = "";
  } catch (e) {
    $("fed-readout").textContent = String(e && e.message ? e.message : e);
    return;
  }
  const [bx, by] = fedToCanvas(canvas, blended[0], blended[1]);
  ctx.fillStyle = "#000";
  ctx.fillRect(bx - 5, by - 5, 10, 10);
  $("fed-readout").textContent = `blend (${blended[0].toFixed(4)}, ${blended[1].toFixed(4)})`;
}

function pointer(canvas, ev) {
  const r = canvas.getBoundingClientRect();
  return [ev.clientX - r.left, ev.clientY - r.top];
}

function wireFed() {
  const canvas = $("fed-canvas");
  canvas.addEventListener("pointerdown", (ev) => {
    const [px, py] = pointer(canvas, ev);
    dragging = agents.findIndex((a) => {
      const [x, y] = fedToCanvas(canvas, a.x, a.y);
      return Math.hypot(x - px, y - py) < 12 + Math.sqrt(a.n);
    });
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (dragging < 0) return;
    const [x, y] = canvasToFed(canvas, ...pointer(canvas, ev));
    agents[dragging].x = Math.max(-1, Math.min(1, x));
    agents[dragging].y = Math.max(-1, Math.min(1, y));
    drawFed();
  });
  window.addEventListener("pointerup", () => (dragging = -1));
}

async function main() {
  await init();
  $("drive-reset").addEventListener("click", resetDrive);
  $("drive-step").addEventListener("click", stepDrive);
  $("drive-play").addEventListener("click", togglePlay);
  $("drive-accel").addEventListener("input", () => {
    $("drive-accel-value").textContent = Number($("drive-accel").value).toFixed(1);
  });
  $("ou-draw").addEventListener("click", drawNoise);
  buildCounts();
  wireFed();
  resetDrive();
  drawNoise();
  drawFed();
}

main().catch(showError);
