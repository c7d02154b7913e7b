/** Just enough PNG parsing to read the dimensions of a preview chip. */
const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];
export function pngDimensions(bytes) {
    // 8-byte signature, 4-byte chunk length, "IHDR", then big-endian
    // width and height as the first two IHDR fields
    if (bytes.length < 24) {
        throw new Error(`not a PNG: only ${bytes.length} bytes`);
    }
    for (let i = 0; i < SIGNATURE.length; i++) {
        if (bytes[i] !== SIGNATURE[i]) {
            throw new Error("not a PNG: bad signature");
        }
    }
    const tag = String.fromCharCode(bytes[12], bytes[13], bytes[14], bytes[15]);
    if (tag !== "IHDR") {
        throw new Error(`not a PNG: first chunk is ${JSON.stringify(tag)}, want IHDR`);
    }
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
    return { width: view.getUint32(16), height: view.getUint32(20) };
}
export function decodeBase64(text) {
    const binary = atob(text);
    const out = new Uint8Array(binary.length);
    for (let i = 0; i < binary.length; i++) {
        out[i] = binary.charCodeAt(i);
    }
    return out;
}
