/**
 * Browser entry: wires the pointer, the play loop, and the canvas painter.
 *
 * The human steers player 1 by moving the pointer over the arena; a fixed
 * cadence timer sends the latest mapped control and every response repaints
 * the trajectory, the prediction fan, the horizon marker, and the panel.
 * The dt/blend sliders configure the NEXT session (restart applies them).
 */

import { SessionClient } from "./client.js";
import { mapPointerToControl, type PointerMode } from "./control.js";
import { renderFrame, type DrawList } from "./render.js";
import { applyStepResponse, initialViewState, makeTransform, type ViewState } from "./view.js";

const canvas = document.getElementById("arena") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const scenarioSelect = document.getElementById("scenario") as HTMLSelectElement;
const startButton = document.getElementById("start") as HTMLButtonElement;
const stopButton = document.getElementById("stop") as HTMLButtonElement;
const dtSlider = document.getElementById("dt") as HTMLInputElement;
const blendSlider = document.getElementById("blend") as HTMLInputElement;
const statusLine = document.getElementById("status") as HTMLElement;

const client = new SessionClient("");
const view: ViewState = initialViewState(900, 20);
let pointer = { x: canvas.width / 2, y: canvas.height / 2 };
let loop: import("./loop.js").PlayLoop | null = null;
let sessionId: string | null = null;

function pointerMode(): PointerMode {
  const d1 = view.scenario?.control_dims[0] ?? 1;
  const bounds = Array.from({ length: d1 }, () => ({ min: -1, max: 1 }));
  const axes: Array<"x" | "y"> = d1 === 1 ? ["y"] : ["x", "y"];
  return {
    rect: { left: 0, top: 0, width: canvas.width, height: canvas.height },
    bounds,
    axes: axes.slice(0, d1),
  };
}

canvas.addEventListener("pointermove", (event) => {
  const rect = canvas.getBoundingClientRect();
  pointer = { x: event.clientX - rect.left, y: event.clientY - rect.top };
});

function paint(ops: DrawList): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#12161b";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  for (const op of ops) {
    if (op.kind === "polyline") {
      if (op.points.length < 2) continue;
      ctx.strokeStyle = op.style.color;
      ctx.lineWidth = op.style.width;
      ctx.setLineDash(op.style.dash);
      ctx.beginPath();
      ctx.moveTo(op.points[0]![0], op.points[0]![1]);
      for (const [x, y] of op.points.slice(1)) ctx.lineTo(x, y);
      ctx.stroke();
      ctx.setLineDash([]);
    } else if (op.kind === "marker") {
      ctx.fillStyle = op.style.color;
      ctx.beginPath();
      ctx.arc(op.at[0], op.at[1], 5, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillText(op.label, op.at[0] + 8, op.at[1] - 8);
    } else if (op.kind === "text") {
      ctx.fillStyle = "#c8d0d8";
      ctx.font = "13px monospace";
      ctx.fillText(op.text, op.at[0], op.at[1]);
    }
    // slider ops are realized by the DOM <input> elements, not the canvas
  }
}

function refreshTransform(): void {
  if (view.scenario?.render === "plane") {
    view.transform = makeTransform(120, 120, canvas.width / 2 - 120, canvas.height / 2);
  } else {
    const t = view.anchor ?? 0;
    // keep the last ~4 seconds plus the prediction window visible
    view.transform = makeTransform(120, 80, 40 - Math.max(0, t - 4) * 120, 260);
  }
}

async function start(): Promise<void> {
  stop();
  view.trajectory.clear();
  view.fan = [];
  view.decodeErrors = 0;
  const created = await client.createSession({
    scenario: scenarioSelect.value,
    h: 0.02,
    predictor: {
      dt: view.pendingConfig.dt,
      blend: view.pendingConfig.blend,
      T: 0.5,
    },
    selection: { mode: "pool", size: 3 },
    horizon: { dt1: view.pendingConfig.dt, dt2: view.pendingConfig.dt * 2, theta: 1e-2, t_max: 0.5 },
  });
  sessionId = created.session_id;
  view.sessionId = created.session_id;
  view.scenario = created.scenario;
  const { PlayLoop } = await import("./loop.js");
  loop = new PlayLoop({
    client,
    sessionId: created.session_id,
    view,
    controlSource: () => mapPointerToControl(pointer, pointerMode()),
    onStep: () => {
      refreshTransform();
      paint(renderFrame(view));
      statusLine.textContent =
        `session ${view.sessionId}  mu=${view.mu}  ` +
        `rate=${loop!.achievedRate().toFixed(1)}/s  decode-errors=${view.decodeErrors}`;
    },
    onError: (err) => {
      statusLine.textContent = `error: ${(err as Error).message}`;
    },
  });
  loop.start();
}

function stop(): void {
  loop?.stop();
  loop = null;
  if (sessionId !== null) void client.close(sessionId).catch(() => undefined);
  sessionId = null;
}

startButton.addEventListener("click", () => void start());
stopButton.addEventListener("click", stop);
dtSlider.addEventListener("input", () => {
  view.pendingConfig.dt = Number(dtSlider.value);
});
blendSlider.addEventListener("input", () => {
  view.pendingConfig.blend = Number(blendSlider.value);
});

paint(renderFrame(view));
