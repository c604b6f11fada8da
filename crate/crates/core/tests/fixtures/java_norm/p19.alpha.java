public class Plant {
    // variant build
    static class Valve {
        int pos;

        Valve(int given) {
            pos = given;
        }

        int doubled() {
            return pos * 2;
        }
    }

    public static void main(String[] argv) {
        Valve feed = new Valve(45);
        System.out.println(feed.doubled());
    }
}
