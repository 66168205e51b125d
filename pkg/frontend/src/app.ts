// UI wiring: sketch canvas, prompt entry, pipeline progress, version gallery
// with sandboxed previews, and branch/re-run controls.

import { GalleryModel } from "./gallery.js";
import { pollUntilDone } from "./poll.js";
import { RpcClient, RpcError } from "./rpc.js";
import { Shape, SketchModel } from "./sketch.js";

type Tool = "rect" | "line" | "path" | "text";

const BACKEND = (window as any).FEDIFF_BACKEND ?? "http://127.0.0.1:8787";

export function startApp(root: HTMLElement): void {
  const client = new RpcClient(BACKEND);
  const sketch = new SketchModel(800, 600);

  root.innerHTML = `
    <header><h1>Sketch-to-Website</h1></header>
    <section class="inputs">
      <div class="canvas-pane">
        <div class="toolbar">
          <button data-tool="rect" class="active">rectangle</button>
          <button data-tool="line">line</button>
          <button data-tool="path">freehand</button>
          <button data-tool="text">text</button>
          <button id="clear">clear</button>
        </div>
        <canvas id="sketch" width="800" height="600"></canvas>
      </div>
      <div class="prompt-pane">
        <textarea id="prompt" placeholder="Describe the website you want"></textarea>
        <button id="submit" disabled>Generate</button>
        <p id="hint">Enter a prompt and draw a layout to start.</p>
        <pre id="progress"></pre>
        <details><summary>PRD</summary><pre id="prd"></pre></details>
      </div>
    </section>
    <section class="gallery-pane">
      <div id="gallery"></div>
      <div class="preview-wrap">
        <iframe id="preview" sandbox="allow-scripts"></iframe>
        <div class="branch-row">
          <button id="branch" disabled>Branch from selected + re-run</button>
        </div>
      </div>
    </section>
    <div id="toast" hidden></div>
  `;

  const canvas = root.querySelector<HTMLCanvasElement>("#sketch")!;
  const ctx = canvas.getContext("2d")!;
  const promptBox = root.querySelector<HTMLTextAreaElement>("#prompt")!;
  const submitBtn = root.querySelector<HTMLButtonElement>("#submit")!;
  const branchBtn = root.querySelector<HTMLButtonElement>("#branch")!;
  const progress = root.querySelector<HTMLPreElement>("#progress")!;
  const prdPane = root.querySelector<HTMLPreElement>("#prd")!;
  const galleryEl = root.querySelector<HTMLDivElement>("#gallery")!;
  const previewFrame = root.querySelector<HTMLIFrameElement>("#preview")!;
  const toast = root.querySelector<HTMLDivElement>("#toast")!;

  let tool: Tool = "rect";
  let sessionId: string | null = null;
  let gallery: GalleryModel | null = null;
  let running = false;
  let dragStart: [number, number] | null = null;
  let freehand: Array<[number, number]> = [];

  function showToast(message: string): void {
    toast.textContent = message;
    toast.hidden = false;
    setTimeout(() => (toast.hidden = true), 4000);
  }

  function redraw(): void {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = "black";
    ctx.lineWidth = 2;
    ctx.font = "16px sans-serif";
    for (const shape of sketch.shapes) {
      drawShape(ctx, shape);
    }
  }

  function updateSubmitState(): void {
    submitBtn.disabled = running || !promptBox.value.trim() || sketch.isEmpty;
  }

  root.querySelectorAll<HTMLButtonElement>(".toolbar button[data-tool]").forEach((btn) => {
    btn.onclick = () => {
      tool = btn.dataset.tool as Tool;
      root.querySelectorAll(".toolbar button").forEach((b) => b.classList.remove("active"));
      btn.classList.add("active");
    };
  });
  root.querySelector<HTMLButtonElement>("#clear")!.onclick = () => {
    sketch.clear();
    redraw();
    updateSubmitState();
  };

  const pos = (ev: MouseEvent): [number, number] => {
    const rect = canvas.getBoundingClientRect();
    return [ev.clientX - rect.left, ev.clientY - rect.top];
  };

  canvas.onmousedown = (ev) => {
    dragStart = pos(ev);
    if (tool === "path") {
      freehand = [dragStart];
    }
  };
  canvas.onmousemove = (ev) => {
    if (tool === "path" && dragStart) {
      freehand.push(pos(ev));
    }
  };
  canvas.onmouseup = (ev) => {
    if (!dragStart) return;
    const [x0, y0] = dragStart;
    const [x1, y1] = pos(ev);
    dragStart = null;
    if (tool === "rect") {
      sketch.add({
        kind: "rect",
        x: Math.min(x0, x1),
        y: Math.min(y0, y1),
        width: Math.abs(x1 - x0),
        height: Math.abs(y1 - y0),
      });
    } else if (tool === "line") {
      sketch.add({ kind: "line", x1: x0, y1: y0, x2: x1, y2: y1 });
    } else if (tool === "path") {
      sketch.add({ kind: "path", points: freehand });
      freehand = [];
    } else if (tool === "text") {
      const content = window.prompt("Label text:") ?? "";
      sketch.add({ kind: "text", x: x1, y: y1, content });
    }
    redraw();
    updateSubmitState();
  };

  promptBox.oninput = updateSubmitState;

  async function refreshGallery(): Promise<void> {
    if (!sessionId) return;
    const snapshot = await client.listVersions(sessionId);
    gallery = new GalleryModel(snapshot, (label) => client.previewUrl(sessionId!, label));
    renderGallery();
  }

  function renderGallery(): void {
    if (!gallery) return;
    galleryEl.innerHTML = "";
    for (const node of gallery.nodes) {
      const tile = document.createElement("div");
      tile.className = "tile" + (gallery.selected === node.label ? " selected" : "");
      tile.style.marginLeft = `${node.depth * 12}px`;
      const frame = document.createElement("iframe");
      frame.setAttribute("sandbox", "allow-scripts");
      frame.src = node.previewUrl;
      frame.className = "thumb";
      const caption = document.createElement("span");
      caption.textContent =
        node.label + (node.parent !== null ? ` (from ${node.parent})` : "");
      tile.append(frame, caption);
      tile.onclick = () => {
        gallery!.select(node.label);
        previewFrame.src = node.previewUrl;
        renderGallery();
      };
      galleryEl.appendChild(tile);
    }
    branchBtn.disabled = running || gallery.selected === null;
  }

  submitBtn.onclick = async () => {
    running = true;
    updateSubmitState();
    progress.textContent = "creating session...";
    try {
      const created = await client.createSession(promptBox.value.trim(), sketch.toSvg());
      sessionId = created.session_id;
      await client.runPipeline(sessionId);
      const final = await pollUntilDone(client, sessionId, (status) => {
        progress.textContent =
          `state: ${status.state}\nversions: ${status.versions.join(" ") || "(none yet)"}`;
        void refreshGallery();
      });
      if (final.state === "failed") {
        showToast(`pipeline failed: ${final.warnings.at(-1) ?? "unknown error"}`);
      } else {
        const prd = await client.getPrd(sessionId);
        prdPane.textContent = prd.markdown;
      }
      await refreshGallery();
      if (gallery?.selected) {
        previewFrame.src = gallery.get(gallery.selected)!.previewUrl;
      }
    } catch (err) {
      showToast(err instanceof RpcError ? `RPC error: ${err.message}` : String(err));
      progress.textContent = "failed - fix the backend connection and retry";
    } finally {
      running = false;
      updateSubmitState();
      renderGallery();
    }
  };

  branchBtn.onclick = async () => {
    if (!sessionId || !gallery?.selected) return;
    running = true;
    branchBtn.disabled = true;
    try {
      await client.branchFrom(sessionId, gallery.selected);
      await client.runLoop(sessionId);
      await refreshGallery();
    } catch (err) {
      showToast(err instanceof RpcError ? err.message : String(err));
    } finally {
      running = false;
      renderGallery();
    }
  };
}

function drawShape(ctx: CanvasRenderingContext2D, shape: Shape): void {
  switch (shape.kind) {
    case "rect":
      ctx.strokeRect(shape.x, shape.y, shape.width, shape.height);
      break;
    case "line":
      ctx.beginPath();
      ctx.moveTo(shape.x1, shape.y1);
      ctx.lineTo(shape.x2, shape.y2);
      ctx.stroke();
      break;
    case "path":
      ctx.beginPath();
      ctx.moveTo(shape.points[0][0], shape.points[0][1]);
      for (const [x, y] of shape.points.slice(1)) {
        ctx.lineTo(x, y);
      }
      ctx.stroke();
      break;
    case "text":
      ctx.fillText(shape.content, shape.x, shape.y);
      break;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  startApp(document.getElementById("app")!);
}
