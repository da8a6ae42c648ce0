/** Minimal pan/zoom for the study image: wheel zooms, drag pans. */

export interface PanZoomState {
  scale: number;
  x: number;
  y: number;
}

export function attachPanZoom(el: HTMLElement): PanZoomState {
  const state: PanZoomState = { scale: 1, x: 0, y: 0 };
  let dragging = false;
  let lastX = 0;
  let lastY = 0;

  const apply = () => {
    el.style.transform = `translate(${state.x}px, ${state.y}px) scale(${state.scale})`;
  };

  el.addEventListener('wheel', (event: WheelEvent) => {
    event.preventDefault();
    const factor = Math.pow(1.1, -event.deltaY / 100);
    state.scale = Math.min(8, Math.max(1, state.scale * factor));
    if (state.scale === 1) {
      state.x = 0;
      state.y = 0;
    }
    apply();
  });
  el.addEventListener('mousedown', (event: MouseEvent) => {
    dragging = true;
    lastX = event.clientX;
    lastY = event.clientY;
  });
  el.addEventListener('mousemove', (event: MouseEvent) => {
    if (!dragging) return;
    state.x += event.clientX - lastX;
    state.y += event.clientY - lastY;
    lastX = event.clientX;
    lastY = event.clientY;
    apply();
  });
  const stop = () => {
    dragging = false;
  };
  el.addEventListener('mouseup', stop);
  el.addEventListener('mouseleave', stop);
  apply();
  return state;
}
