interface Meter {
    int read();
}

public class WaterMeter implements Meter {
    private int level;

    public WaterMeter(int start) {
        level = start;
    }

    public int read() {
        return level;
    }

    public static void main(String[] args) {
        Meter gauge = new WaterMeter(88);
        System.out.println(gauge.read());
    }
}
