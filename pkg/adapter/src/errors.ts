export class DataFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'DataFormatError';
  }
}

export class OutOfMemoryError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'OutOfMemoryError';
  }
}

export class PortInUseError extends Error {
  constructor(port: number) {
    super(`port ${port} is already in use`);
    this.name = 'PortInUseError';
  }
}
