/**
 * WebGL2 point + wireframe renderer with an offscreen depth readback target.
 *
 * Contract: cloud vertex data is uploaded to the GPU exactly once per cloud
 * (`uploads` counts conversions; tests pin it). Per-frame work is uniform
 * updates and draw calls only. Losing the GL context re-uploads from the
 * retained CPU arrays without another network fetch.
 *
 * Depth readback: WebGL2 cannot read the depth attachment directly, so a
 * second point pass writes gl_FragCoord.z (normalized depth, near=0 far=1,
 * background 1) into an RGBA32F color attachment which readPixels can see.
 */

import type { OrbitCamera } from "./math.js";
import { boxCorners, viewProjection, type BoxLike } from "./math.js";

const POINT_VS = `#version 300 es
layout(location=0) in vec3 aPos;
layout(location=1) in vec3 aColor;
uniform mat4 uMvp;
uniform float uPointSize;
out vec3 vColor;
void main() {
  gl_Position = uMvp * vec4(aPos, 1.0);
  gl_PointSize = uPointSize;
  vColor = aColor;
}`;

const POINT_FS = `#version 300 es
precision highp float;
in vec3 vColor;
out vec4 fragColor;
void main() { fragColor = vec4(vColor, 1.0); }`;

const DEPTH_FS = `#version 300 es
precision highp float;
in vec3 vColor;
out vec4 fragColor;
void main() { fragColor = vec4(gl_FragCoord.z, 0.0, 0.0, 1.0); }`;

const LINE_VS = `#version 300 es
layout(location=0) in vec3 aPos;
uniform mat4 uMvp;
void main() { gl_Position = uMvp * vec4(aPos, 1.0); }`;

const LINE_FS = `#version 300 es
precision highp float;
uniform vec4 uColor;
out vec4 fragColor;
void main() { fragColor = uColor; }`;

// box edges over the corner bit-pattern order
const BOX_EDGES: [number, number][] = [
  [0, 1], [2, 3], [4, 5], [6, 7], // along length
  [0, 2], [1, 3], [4, 6], [5, 7], // along width
  [0, 4], [1, 5], [2, 6], [3, 7], // along height
];

export interface DrawableBox extends BoxLike {
  color: [number, number, number, number];
}

export class PointRenderer {
  uploads = 0;

  private pointProgram!: WebGLProgram;
  private depthProgram!: WebGLProgram;
  private lineProgram!: WebGLProgram;
  private positionBuffer: WebGLBuffer | null = null;
  private colorBuffer: WebGLBuffer | null = null;
  private lineBuffer!: WebGLBuffer;
  private depthFbo: WebGLFramebuffer | null = null;
  private depthTexture: WebGLTexture | null = null;
  private depthRenderbuffer: WebGLRenderbuffer | null = null;
  private fboSize: [number, number] = [0, 0];
  private count = 0;
  private retainedPositions: Float32Array | null = null;
  private retainedColors: Uint8Array | null = null;
  readonly floatTargetSupported: boolean;

  constructor(private gl: WebGL2RenderingContext) {
    this.floatTargetSupported =
      gl.getExtension("EXT_color_buffer_float") !== null;
    this.initPrograms();
  }

  private initPrograms(): void {
    this.pointProgram = this.link(POINT_VS, POINT_FS);
    this.depthProgram = this.link(POINT_VS, DEPTH_FS);
    this.lineProgram = this.link(LINE_VS, LINE_FS);
    this.lineBuffer = this.gl.createBuffer()!;
  }

  private link(vsSource: string, fsSource: string): WebGLProgram {
    const gl = this.gl;
    const compile = (kind: number, source: string) => {
      const shader = gl.createShader(kind)!;
      gl.shaderSource(shader, source);
      gl.compileShader(shader);
      if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
        throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
      }
      return shader;
    };
    const program = gl.createProgram()!;
    gl.attachShader(program, compile(gl.VERTEX_SHADER, vsSource));
    gl.attachShader(program, compile(gl.FRAGMENT_SHADER, fsSource));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
    }
    return program;
  }

  /** One-time conversion + GPU upload of a cloud. */
  uploadCloud(positions: Float32Array, colors: Uint8Array | null): void {
    const gl = this.gl;
    this.retainedPositions = positions;
    this.retainedColors = colors;
    this.count = positions.length / 3;
    if (this.positionBuffer) gl.deleteBuffer(this.positionBuffer);
    if (this.colorBuffer) gl.deleteBuffer(this.colorBuffer);
    this.positionBuffer = gl.createBuffer()!;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.positionBuffer);
    gl.bufferData(gl.ARRAY_BUFFER, positions, gl.STATIC_DRAW);
    this.colorBuffer = null;
    if (colors) {
      this.colorBuffer = gl.createBuffer()!;
      gl.bindBuffer(gl.ARRAY_BUFFER, this.colorBuffer);
      gl.bufferData(gl.ARRAY_BUFFER, colors, gl.STATIC_DRAW);
    }
    this.uploads += 1;
  }

  /** Context-restored path: rebuild GL objects from retained arrays. */
  restore(): void {
    this.initPrograms();
    this.depthFbo = null;
    this.depthTexture = null;
    this.depthRenderbuffer = null;
    this.fboSize = [0, 0];
    if (this.retainedPositions) {
      this.uploadCloud(this.retainedPositions, this.retainedColors);
    }
  }

  private bindPointAttributes(): void {
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.positionBuffer);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 0, 0);
    if (this.colorBuffer) {
      gl.bindBuffer(gl.ARRAY_BUFFER, this.colorBuffer);
      gl.enableVertexAttribArray(1);
      gl.vertexAttribPointer(1, 3, gl.UNSIGNED_BYTE, true, 0, 0);
    } else {
      gl.disableVertexAttribArray(1);
      gl.vertexAttrib3f(1, 0.78, 0.82, 0.85);
    }
  }

  private drawPoints(program: WebGLProgram, camera: OrbitCamera, pointSize: number): void {
    const gl = this.gl;
    gl.useProgram(program);
    gl.uniformMatrix4fv(
      gl.getUniformLocation(program, "uMvp"), false, viewProjection(camera),
    );
    gl.uniform1f(gl.getUniformLocation(program, "uPointSize"), pointSize);
    this.bindPointAttributes();
    gl.drawArrays(gl.POINTS, 0, this.count);
  }

  drawFrame(
    camera: OrbitCamera,
    boxes: DrawableBox[],
    pointSize: number,
  ): void {
    const gl = this.gl;
    const [width, height] = camera.viewport;
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
    gl.viewport(0, 0, width, height);
    gl.enable(gl.DEPTH_TEST);
    gl.clearColor(0.07, 0.08, 0.1, 1.0);
    gl.clearDepth(1.0);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (this.count > 0) {
      this.drawPoints(this.pointProgram, camera, pointSize);
    }
    if (boxes.length > 0) {
      this.drawWireframes(camera, boxes);
    }
  }

  private drawWireframes(camera: OrbitCamera, boxes: DrawableBox[]): void {
    const gl = this.gl;
    gl.useProgram(this.lineProgram);
    gl.uniformMatrix4fv(
      gl.getUniformLocation(this.lineProgram, "uMvp"),
      false,
      viewProjection(camera),
    );
    const colorLoc = gl.getUniformLocation(this.lineProgram, "uColor");
    gl.bindBuffer(gl.ARRAY_BUFFER, this.lineBuffer);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 0, 0);
    gl.disableVertexAttribArray(1);
    for (const box of boxes) {
      const corners = boxCorners(box);
      const segments = new Float32Array(BOX_EDGES.length * 6);
      BOX_EDGES.forEach(([a, b], i) => {
        segments.set(corners[a], i * 6);
        segments.set(corners[b], i * 6 + 3);
      });
      gl.bufferData(gl.ARRAY_BUFFER, segments, gl.DYNAMIC_DRAW);
      gl.uniform4fv(colorLoc, box.color);
      gl.drawArrays(gl.LINES, 0, BOX_EDGES.length * 2);
    }
  }

  private ensureDepthTarget(width: number, height: number): void {
    const gl = this.gl;
    if (this.depthFbo && this.fboSize[0] === width && this.fboSize[1] === height) {
      return;
    }
    if (this.depthFbo) gl.deleteFramebuffer(this.depthFbo);
    if (this.depthTexture) gl.deleteTexture(this.depthTexture);
    if (this.depthRenderbuffer) gl.deleteRenderbuffer(this.depthRenderbuffer);
    this.depthTexture = gl.createTexture()!;
    gl.bindTexture(gl.TEXTURE_2D, this.depthTexture);
    gl.texStorage2D(gl.TEXTURE_2D, 1, gl.RGBA32F, width, height);
    this.depthRenderbuffer = gl.createRenderbuffer()!;
    gl.bindRenderbuffer(gl.RENDERBUFFER, this.depthRenderbuffer);
    gl.renderbufferStorage(gl.RENDERBUFFER, gl.DEPTH_COMPONENT24, width, height);
    this.depthFbo = gl.createFramebuffer()!;
    gl.bindFramebuffer(gl.FRAMEBUFFER, this.depthFbo);
    gl.framebufferTexture2D(
      gl.FRAMEBUFFER, gl.COLOR_ATTACHMENT0, gl.TEXTURE_2D, this.depthTexture, 0,
    );
    gl.framebufferRenderbuffer(
      gl.FRAMEBUFFER, gl.DEPTH_ATTACHMENT, gl.RENDERBUFFER, this.depthRenderbuffer,
    );
    if (gl.checkFramebufferStatus(gl.FRAMEBUFFER) !== gl.FRAMEBUFFER_COMPLETE) {
      throw new Error("depth readback framebuffer incomplete");
    }
    this.fboSize = [width, height];
  }

  /**
   * Render the depth pass and read the square patch around a click.
   * Row-major, top-left origin, out-of-viewport cells = 1 (background).
   */
  readDepthPatch(
    camera: OrbitCamera,
    clickX: number,
    clickY: number,
    radius: number,
    pointSize: number,
  ): Float32Array {
    const gl = this.gl;
    const [width, height] = camera.viewport;
    this.ensureDepthTarget(width, height);
    gl.bindFramebuffer(gl.FRAMEBUFFER, this.depthFbo);
    gl.viewport(0, 0, width, height);
    gl.enable(gl.DEPTH_TEST);
    gl.clearColor(1.0, 1.0, 1.0, 1.0); // background depth = exactly 1
    gl.clearDepth(1.0);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (this.count > 0) {
      this.drawPoints(this.depthProgram, camera, pointSize);
    }

    const side = 2 * radius + 1;
    const patch = new Float32Array(side * side).fill(1);
    const cx = Math.floor(clickX);
    const cy = Math.floor(clickY);
    const x0 = Math.max(cx - radius, 0);
    const x1 = Math.min(cx + radius, width - 1);
    const y0 = Math.max(cy - radius, 0);
    const y1 = Math.min(cy + radius, height - 1);
    if (x1 >= x0 && y1 >= y0) {
      const rw = x1 - x0 + 1;
      const rh = y1 - y0 + 1;
      const rect = new Float32Array(rw * rh * 4);
      // readPixels is bottom-left origin
      gl.readPixels(x0, height - 1 - y1, rw, rh, gl.RGBA, gl.FLOAT, rect);
      for (let row = 0; row < rh; row++) {
        const screenY = y1 - row; // rect row 0 is the lowest scanline
        const patchRow = screenY - (cy - radius);
        for (let col = 0; col < rw; col++) {
          const patchCol = x0 + col - (cx - radius);
          patch[patchRow * side + patchCol] = rect[(row * rw + col) * 4];
        }
      }
    }
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
    return patch;
  }
}

export function parseHexColor(hex: string): [number, number, number, number] {
  const value = hex.replace("#", "");
  const r = parseInt(value.slice(0, 2), 16) / 255;
  const g = parseInt(value.slice(2, 4), 16) / 255;
  const b = parseInt(value.slice(4, 6), 16) / 255;
  return [r, g, b, 1.0];
}
