/** WebGL point-cloud renderer with a measurement-line overlay. */

import type { Mat4 } from "./math3.js";
import type { PointCloudData, Vec3 } from "./types.js";

const POINT_VS = `
attribute vec3 aPosition;
attribute vec3 aColor;
uniform mat4 uViewProj;
uniform float uPointSize;
varying vec3 vColor;
void main() {
  gl_Position = uViewProj * vec4(aPosition, 1.0);
  gl_PointSize = uPointSize;
  vColor = aColor;
}`;

const POINT_FS = `
precision mediump float;
varying vec3 vColor;
void main() {
  gl_FragColor = vec4(vColor, 1.0);
}`;

const FLAT_VS = `
attribute vec3 aPosition;
uniform mat4 uViewProj;
uniform float uPointSize;
void main() {
  gl_Position = uViewProj * vec4(aPosition, 1.0);
  gl_PointSize = uPointSize;
}`;

const FLAT_FS = `
precision mediump float;
uniform vec4 uColor;
void main() {
  gl_FragColor = uColor;
}`;

function compile(gl: WebGLRenderingContext, type: number, source: string): WebGLShader {
  const shader = gl.createShader(type)!;
  gl.shaderSource(shader, source);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
  }
  return shader;
}

function link(gl: WebGLRenderingContext, vs: string, fs: string): WebGLProgram {
  const program = gl.createProgram()!;
  gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, vs));
  gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, fs));
  gl.linkProgram(program);
  if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
    throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
  }
  return program;
}

export class CloudRenderer {
  private gl: WebGLRenderingContext;
  private pointProgram: WebGLProgram;
  private flatProgram: WebGLProgram;
  private positionBuffer: WebGLBuffer;
  private colorBuffer: WebGLBuffer;
  private overlayBuffer: WebGLBuffer;
  private count = 0;
  pointSize = 2.0;

  constructor(private canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl");
    if (!gl) {
      throw new Error("WebGL is not available");
    }
    this.gl = gl;
    this.pointProgram = link(gl, POINT_VS, POINT_FS);
    this.flatProgram = link(gl, FLAT_VS, FLAT_FS);
    this.positionBuffer = gl.createBuffer()!;
    this.colorBuffer = gl.createBuffer()!;
    this.overlayBuffer = gl.createBuffer()!;
    gl.enable(gl.DEPTH_TEST);
    gl.clearColor(0.07, 0.08, 0.1, 1.0);
  }

  setCloud(cloud: PointCloudData): void {
    const gl = this.gl;
    this.count = cloud.count;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.positionBuffer);
    gl.bufferData(gl.ARRAY_BUFFER, cloud.positions, gl.STATIC_DRAW);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.colorBuffer);
    gl.bufferData(gl.ARRAY_BUFFER, cloud.colors, gl.STATIC_DRAW);
  }

  aspect(): number {
    return this.canvas.width / Math.max(1, this.canvas.height);
  }

  render(viewProj: Mat4, endpointA: Vec3 | null, endpointB: Vec3 | null): void {
    const gl = this.gl;
    gl.viewport(0, 0, this.canvas.width, this.canvas.height);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (this.count > 0) {
      gl.useProgram(this.pointProgram);
      gl.uniformMatrix4fv(gl.getUniformLocation(this.pointProgram, "uViewProj"), false, viewProj);
      gl.uniform1f(gl.getUniformLocation(this.pointProgram, "uPointSize"), this.pointSize);
      const posLoc = gl.getAttribLocation(this.pointProgram, "aPosition");
      gl.bindBuffer(gl.ARRAY_BUFFER, this.positionBuffer);
      gl.enableVertexAttribArray(posLoc);
      gl.vertexAttribPointer(posLoc, 3, gl.FLOAT, false, 0, 0);
      const colLoc = gl.getAttribLocation(this.pointProgram, "aColor");
      gl.bindBuffer(gl.ARRAY_BUFFER, this.colorBuffer);
      gl.enableVertexAttribArray(colLoc);
      gl.vertexAttribPointer(colLoc, 3, gl.FLOAT, false, 0, 0);
      gl.drawArrays(gl.POINTS, 0, this.count);
    }
    this.renderOverlay(viewProj, endpointA, endpointB);
  }

  private renderOverlay(viewProj: Mat4, a: Vec3 | null, b: Vec3 | null): void {
    const gl = this.gl;
    const picked = [a, b].filter((p): p is Vec3 => p !== null);
    if (picked.length === 0) return;
    gl.useProgram(this.flatProgram);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.flatProgram, "uViewProj"), false, viewProj);
    const colorLoc = gl.getUniformLocation(this.flatProgram, "uColor");
    const posLoc = gl.getAttribLocation(this.flatProgram, "aPosition");
    gl.bindBuffer(gl.ARRAY_BUFFER, this.overlayBuffer);
    gl.enableVertexAttribArray(posLoc);
    gl.vertexAttribPointer(posLoc, 3, gl.FLOAT, false, 0, 0);
    gl.disable(gl.DEPTH_TEST);
    if (picked.length === 2) {
      gl.bufferData(gl.ARRAY_BUFFER, new Float32Array([...picked[0], ...picked[1]]), gl.DYNAMIC_DRAW);
      gl.uniform4f(colorLoc, 1.0, 0.15, 0.15, 1.0);
      gl.uniform1f(gl.getUniformLocation(this.flatProgram, "uPointSize"), 1.0);
      gl.drawArrays(gl.LINES, 0, 2);
    }
    gl.bufferData(
      gl.ARRAY_BUFFER,
      new Float32Array(picked.flatMap((p) => [...p])),
      gl.DYNAMIC_DRAW
    );
    gl.uniform4f(colorLoc, 1.0, 0.3, 0.3, 1.0);
    gl.uniform1f(gl.getUniformLocation(this.flatProgram, "uPointSize"), 10.0);
    gl.drawArrays(gl.POINTS, 0, picked.length);
    gl.enable(gl.DEPTH_TEST);
  }
}
